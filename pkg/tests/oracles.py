"""Independent oracles used across the test suite.

Each oracle avoids the code path it checks: gradients come from central
finite differences, advantage estimates from the O(T^2) double sum, beam
rankings from exhaustive action-sequence enumeration, and shortest paths
from brute-force simple-path enumeration.
"""

from __future__ import annotations

import numpy as np

from causalwalk import nn
from causalwalk.env import Environment, Question


def numeric_gradient(loss_fn, tensor: nn.Tensor, step: float = 1e-5) -> np.ndarray:
    """Central finite differences of a scalar loss wrt one parameter tensor."""
    grad = np.zeros_like(tensor.data)
    flat = tensor.data.reshape(-1)
    out = grad.reshape(-1)
    for i in range(flat.size):
        original = flat[i]
        flat[i] = original + step
        up = loss_fn()
        flat[i] = original - step
        down = loss_fn()
        flat[i] = original
        out[i] = (up - down) / (2.0 * step)
    return grad


def max_relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    return float(np.max(np.abs(analytic - numeric) / denom))


def check_gradients(
    loss_fn, params: dict[str, nn.Tensor], tol: float, step: float = 1e-5
) -> float:
    """FD-check every parameter against a fresh analytic backward pass."""
    for p in params.values():
        p.zero_grad()
    loss = loss_fn(tensors=True)
    nn.backward(loss)
    worst = 0.0
    for name, p in params.items():
        analytic = p.grad if p.grad is not None else np.zeros_like(p.data)
        with nn.no_grad():
            numeric = numeric_gradient(lambda: float(loss_fn(tensors=True).item()), p, step)
        worst = max(worst, max_relative_error(analytic, numeric))
    assert worst < tol, f"gradient mismatch: max rel err {worst:.3e} >= {tol}"
    return worst


def gae_bruteforce(rewards, values, gamma: float, lam: float):
    """Direct double-sum evaluation of the exponentially weighted advantages."""
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    T = rewards.size
    deltas = np.array(
        [rewards[t] + gamma * values[t + 1] - values[t] for t in range(T)]
    )
    advantages = np.zeros(T)
    for t in range(T):
        for l in range(T - t):
            advantages[t] += (gamma * lam) ** l * deltas[t + l]
    return advantages, advantages + values[:-1]


def enumerate_ranked_paths(policy, env: Environment, question: Question):
    """All length-T walks under the policy, deduplicated and ranked like Eq.-4 decoding.

    Enumerates every action sequence depth-first, scoring with the same
    stepwise log-probability accumulation (so float results are directly
    comparable), merges identical entity sequences keeping the larger score,
    and sorts by (-log_prob, entity sequence).
    """
    results: dict[tuple, tuple] = {}
    root = env.reset(question)

    def log(p: float) -> float:
        return float(np.log(p)) if p > 0.0 else float("-inf")

    def walk(state, carry, entities, log_prob, step_probs, edges):
        if state.t == env.T:
            best = results.get(entities)
            if best is None or log_prob > best[0]:
                results[entities] = (log_prob, step_probs, edges)
            return
        new_carry = policy.advance(carry, state)
        actions = env.action_space(state)
        probs = policy.distribution(new_carry, state, actions)
        for idx, action in enumerate(actions):
            next_state, _ = env.step(state, action)
            walk(
                next_state,
                new_carry,
                entities + (next_state.e_t,),
                log_prob + log(float(probs[idx])),
                step_probs + (float(probs[idx]),),
                edges + (action.edge,),
            )

    walk(root, policy.initial_carry(), (root.e_t,), 0.0, (), ())
    ranked = sorted(results.items(), key=lambda kv: (-kv[1][0], kv[0]))
    return [
        {"entities": seq, "log_prob": lp, "step_probs": sp, "edges": ed}
        for seq, (lp, sp, ed) in ranked
    ]


def shortest_simple_path_length(graph, src: int, dst: int, max_hops: int):
    """Brute-force shortest path length via DFS over simple paths, or None."""
    if src == dst:
        return 0
    best = None

    def dfs(node, depth, seen):
        nonlocal best
        if depth >= max_hops or (best is not None and depth + 1 >= best):
            return
        for edge in graph.adjacency[node]:
            if edge.dst == dst:
                length = depth + 1
                if best is None or length < best:
                    best = length
                continue
            if edge.dst not in seen:
                seen.add(edge.dst)
                dfs(edge.dst, depth + 1, seen)
                seen.remove(edge.dst)

    dfs(src, 0, {src})
    return best
