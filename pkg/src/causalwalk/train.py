"""Training: supervised bootstrapping from BFS demonstrations, then A2C.

The supervised phase replays shortest-path demonstrations (STAY-padded to
length T) through REINFORCE with unit step rewards, updating only the
policy side (shared encoder + policy head); the value head stays frozen.
The A2C phase samples on-policy rollouts, computes generalized advantage
estimates and lambda-returns, and applies one clipped AdamW step each to
theta (encoder + policy head) and psi (encoder + value head), both gradient
sets evaluated at the pre-update parameters.

Losses follow the printed update rules: the policy term is averaged over
the batch only, the value and entropy terms over B*(T-1) (guarded to B for
T=1).  Advantages and lambda-return targets are constants with respect to
the parameters.  The entropy term enters the minimized loss as -beta*H, the
exploration-bonus sign.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from . import nn
from .agent import (
    AgentConfig,
    AgentParams,
    encode_history,
    init_params,
    policy_logits,
    value,
)
from .env import Environment, Question, Rollout, RolloutStep
from .graph import bfs_shortest_path


class ConfigError(ValueError):
    """Raised when a training run is configured with unusable inputs."""


@dataclass(frozen=True)
class Demonstration:
    question: Question
    action_indices: tuple[int, ...]


@dataclass(frozen=True)
class GaeResult:
    advantages: np.ndarray  # (T,)
    lambda_returns: np.ndarray  # (T,)


def compute_gae(
    rewards: np.ndarray, values: np.ndarray, gamma: float, lam: float
) -> GaeResult:
    """GAE advantages and lambda-returns from one episode.

    ``values`` has length T+1; its last entry is the bootstrap value (zero
    for the fixed-length terminal episodes used here).  The identity
    R_t(lambda) = A_t + V(s_t) holds exactly as computed.
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    T = rewards.size
    if values.size != T + 1:
        raise ValueError("values must have length T+1 (with bootstrap entry)")
    deltas = rewards + gamma * values[1:] - values[:-1]
    advantages = np.empty(T)
    acc = 0.0
    for t in range(T - 1, -1, -1):
        acc = deltas[t] + gamma * lam * acc
        advantages[t] = acc
    return GaeResult(advantages=advantages, lambda_returns=advantages + values[:-1])


def _find_action_index(env: Environment, state, next_entity: int) -> int:
    actions = env.action_space(state)
    if next_entity == state.e_t:
        return len(actions) - 1  # STAY is always last
    for i, action in enumerate(actions):
        if action.edge is not None and action.edge.dst == next_entity:
            return i
    raise ValueError(f"no edge from {state.e_t} to {next_entity}")


def generate_demonstrations(
    env: Environment,
    questions: Sequence[Question],
    alpha: float,
    seed: int,
) -> tuple[list[Demonstration], int]:
    """BFS demonstrations for a seeded uniform sample of ceil(alpha*n) questions.

    Each shortest path of length <= T becomes an action-index sequence padded
    with STAY; questions with no such path are dropped, and the drop count is
    returned alongside the demonstrations.
    """
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    k = math.ceil(alpha * len(questions))
    chosen = rng.choice(len(questions), size=k, replace=False)
    demos: list[Demonstration] = []
    dropped = 0
    for qi in chosen:
        question = questions[int(qi)]
        result = bfs_shortest_path(env.graph, question.e_c, question.e_e, env.T)
        if result.path is None:
            dropped += 1
            continue
        state = env.reset(question)
        indices: list[int] = []
        for nxt in result.path[1:]:
            idx = _find_action_index(env, state, nxt)
            indices.append(idx)
            state, _ = env.step(state, env.action_space(state)[idx])
        while len(indices) < env.T:
            idx = len(env.action_space(state)) - 1
            indices.append(idx)
            state, _ = env.step(state, env.action_space(state)[idx])
        demos.append(Demonstration(question=question, action_indices=tuple(indices)))
    return demos, dropped


def _replay_logprobs(
    params: AgentParams, env: Environment, question: Question, indices: Sequence[int]
):
    """Forward a fixed action sequence, returning per-step logp and probs tensors."""
    state = env.reset(question)
    carry = state.history
    logps = []
    probs = []
    carries = []
    for idx in indices:
        carry = encode_history(params, carry, state.q_embed, state.e_t_embed)
        carries.append(carry)
        actions = env.action_space(state)
        logits = policy_logits(params, carry, actions)
        logps.append(nn.get(nn.log_softmax(logits), idx))
        probs.append(nn.softmax(logits))
        state, _ = env.step(state, actions[idx], history=carry)
    return logps, probs, carries


def _entropy_norm(batch: int, T: int) -> float:
    return batch * max(T - 1, 1)


def supervised_update(
    params: AgentParams,
    env: Environment,
    batch: Sequence[Demonstration],
    beta: float,
    opt_theta: nn.AdamWState,
    grad_clip: float = 0.5,
) -> dict:
    """One REINFORCE step on demonstrations with unit rewards.

    Only theta (shared encoder + policy head) is touched; the value head is
    left bit-identical.
    """
    if not batch:
        raise ValueError("supervised batch must be non-empty")
    B = len(batch)
    loss = nn.Tensor(0.0)
    entropy_sum = nn.Tensor(0.0)
    for demo in batch:
        logps, probs, _ = _replay_logprobs(params, env, demo.question, demo.action_indices)
        for logp in logps:
            loss = loss + logp
        for p in probs:
            entropy_sum = entropy_sum + nn.entropy(p)
    mean_entropy = (1.0 / _entropy_norm(B, env.T)) * entropy_sum
    loss = (-1.0 / B) * loss - beta * mean_entropy
    params.zero_grad()
    nn.backward(loss)
    grads = {
        name: params.tensors[name].grad
        for name in params.theta_names
        if params.tensors[name].grad is not None
    }
    grads = nn.clip_global_norm(grads, grad_clip)
    nn.adamw_step(params.named(params.theta_names), grads, opt_theta)
    return {"policy_loss": loss.item(), "entropy": mean_entropy.item()}


def collect_rollout(
    params: AgentParams, env: Environment, question: Question, rng: np.random.Generator
) -> Rollout:
    """Sample one on-policy episode of length T (no gradient recording)."""
    steps: list[RolloutStep] = []
    with nn.no_grad():
        state = env.reset(question)
        carry = state.history
        for _ in range(env.T):
            carry = encode_history(params, carry, state.q_embed, state.e_t_embed)
            actions = env.action_space(state)
            logits = policy_logits(params, carry, actions)
            probs = nn.softmax(logits).data
            idx = nn.sample_categorical(probs, rng)
            carry_data = (carry[0].data, carry[1].data)
            new_state, reward = env.step(state, actions[idx], history=carry_data)
            steps.append(
                RolloutStep(
                    state=state,
                    action_index=idx,
                    action=actions[idx],
                    reward=reward,
                    probs=probs.copy(),
                )
            )
            state = new_state
    return Rollout(question=question, steps=steps)


def a2c_update(
    params: AgentParams,
    env: Environment,
    rollouts: Sequence[Rollout],
    config: AgentConfig,
    opt_theta: nn.AdamWState,
    opt_psi: Optional[nn.AdamWState],
) -> dict:
    """One synchronous actor-critic update over a batch of rollouts.

    Without a critic (``config.use_critic`` false) the advantages collapse to
    discounted returns-to-go (GAE with zero values and lambda=1) and the
    value side is skipped entirely, which is plain REINFORCE.
    """
    B = len(rollouts)
    T = env.T
    policy_term = nn.Tensor(0.0)
    entropy_sum = nn.Tensor(0.0)
    value_term = nn.Tensor(0.0)
    mean_advantage = 0.0
    for rollout in rollouts:
        indices = [s.action_index for s in rollout.steps]
        logps, probs, carries = _replay_logprobs(params, env, rollout.question, indices)
        if config.use_critic:
            values_t = [value(params, carry) for carry in carries]
            values_np = np.asarray([v.item() for v in values_t] + [0.0])
        else:
            values_t = []
            values_np = np.zeros(T + 1)
        gae = compute_gae(
            rollout.rewards,
            values_np,
            config.gamma,
            config.lam if config.use_critic else 1.0,
        )
        mean_advantage += float(gae.advantages.mean())
        for t in range(T):
            policy_term = policy_term + float(gae.advantages[t]) * logps[t]
            entropy_sum = entropy_sum + nn.entropy(probs[t])
            if config.use_critic:
                err = float(gae.lambda_returns[t]) - values_t[t]
                value_term = value_term + err * err

    mean_entropy = (1.0 / _entropy_norm(B, T)) * entropy_sum
    policy_loss = (-1.0 / B) * policy_term - config.entropy_beta * mean_entropy
    diagnostics = {
        "policy_loss": policy_loss.item(),
        "entropy": mean_entropy.item(),
        "mean_advantage": mean_advantage / B,
    }

    params.zero_grad()
    if config.use_critic:
        value_loss = (1.0 / _entropy_norm(B, T)) * value_term
        diagnostics["value_loss"] = value_loss.item()
        nn.backward(policy_loss, retain_graph=True)
        theta_grads = {
            name: params.tensors[name].grad.copy()
            for name in params.theta_names
            if params.tensors[name].grad is not None
        }
        params.zero_grad()
        nn.backward(value_loss)
        psi_grads = {
            name: params.tensors[name].grad
            for name in params.psi_names
            if params.tensors[name].grad is not None
        }
        theta_grads = nn.clip_global_norm(theta_grads, config.grad_clip)
        psi_grads = nn.clip_global_norm(psi_grads, config.grad_clip)
        nn.adamw_step(params.named(params.theta_names), theta_grads, opt_theta)
        nn.adamw_step(params.named(params.psi_names), psi_grads, opt_psi)
    else:
        diagnostics["value_loss"] = 0.0
        nn.backward(policy_loss)
        theta_grads = {
            name: params.tensors[name].grad
            for name in params.theta_names
            if params.tensors[name].grad is not None
        }
        theta_grads = nn.clip_global_norm(theta_grads, config.grad_clip)
        nn.adamw_step(params.named(params.theta_names), theta_grads, opt_theta)
    return diagnostics


def make_optimizers(
    config: AgentConfig,
) -> tuple[nn.AdamWState, nn.AdamWState]:
    kwargs = dict(lr=config.lr, weight_decay=config.weight_decay)
    return nn.AdamWState(**kwargs), nn.AdamWState(**kwargs)


def train_loop(
    env: Environment,
    questions: Sequence[Question],
    config: AgentConfig,
    params: AgentParams | None = None,
    log_path=None,
    checkpoint_dir=None,
    eval_fn: Callable[[AgentParams, int], dict] | None = None,
    progress: Callable[[dict], None] | None = None,
) -> tuple[AgentParams, list[dict]]:
    """Supervised bootstrapping followed by the A2C loop of the training recipe.

    ``questions`` must already be positive and linked.  Returns the trained
    parameters and the metrics records ({step, policy_loss, value_loss,
    entropy, unique_paths, wall_ms} plus a phase tag); records are also
    streamed to ``log_path`` as newline-delimited JSON when given.
    """
    if not questions:
        raise ConfigError("training requires at least one linked positive question")
    rngs = nn.derive_rngs(
        config.seed, ["init", "demos", "shuffle", "questions", "actions"]
    )
    if params is None:
        params = init_params(config, seed=None)
    opt_theta, opt_psi = make_optimizers(config)
    records: list[dict] = []
    start = time.monotonic()
    log_fh = open(log_path, "w", encoding="utf-8") if log_path else None
    setup_info: dict = {}

    def emit(record: dict) -> None:
        if setup_info:
            record.update(setup_info)
            setup_info.clear()
        records.append(record)
        if log_fh is not None:
            log_fh.write(json.dumps(record) + "\n")
            log_fh.flush()
        if progress is not None:
            progress(record)

    def wall_ms() -> int:
        return int((time.monotonic() - start) * 1000)

    try:
        if config.supervised_steps > 0:
            demos, demos_dropped = generate_demonstrations(
                env, questions, config.alpha, seed=int(rngs["demos"].integers(2**63))
            )
            if not demos:
                raise ConfigError("no BFS demonstration has a path within T hops")
            setup_info["demos_dropped"] = demos_dropped
            order: list[int] = []
            for step in range(1, config.supervised_steps + 1):
                batch: list[Demonstration] = []
                while len(batch) < config.supervised_batch:
                    if not order:
                        order = list(rngs["shuffle"].permutation(len(demos)))
                    batch.append(demos[order.pop()])
                diag = supervised_update(
                    params, env, batch, config.entropy_beta, opt_theta, config.grad_clip
                )
                if step % config.log_every == 0 or step == config.supervised_steps:
                    emit(
                        {
                            "phase": "supervised",
                            "step": step,
                            "policy_loss": diag["policy_loss"],
                            "value_loss": None,
                            "entropy": diag["entropy"],
                            "unique_paths": 0,
                            "wall_ms": wall_ms(),
                        }
                    )

        unique_paths: set[tuple[int, ...]] = set()
        for step in range(1, config.steps + 1):
            rollouts = []
            for _ in range(config.batch_size):
                q = questions[int(rngs["questions"].integers(len(questions)))]
                rollout = collect_rollout(params, env, q, rngs["actions"])
                unique_paths.add(tuple(rollout.path))
                rollouts.append(rollout)
            diag = a2c_update(params, env, rollouts, config, opt_theta, opt_psi)
            if step % config.log_every == 0 or step == config.steps:
                record = {
                    "phase": "rl",
                    "step": step,
                    "policy_loss": diag["policy_loss"],
                    "value_loss": diag["value_loss"],
                    "entropy": diag["entropy"],
                    "unique_paths": len(unique_paths),
                    "wall_ms": wall_ms(),
                }
                if eval_fn is not None and config.eval_every and (
                    step % config.eval_every == 0 or step == config.steps
                ):
                    record.update(eval_fn(params, step))
                emit(record)
            if checkpoint_dir is not None and config.checkpoint_every and (
                step % config.checkpoint_every == 0
            ):
                from .agent import save_checkpoint

                save_checkpoint(
                    f"{checkpoint_dir}/checkpoint_step{step}.bin",
                    params,
                    config,
                    env.graph.entity_digest(),
                    len(env.graph),
                )
    finally:
        if log_fh is not None:
            log_fh.close()
    return params, records


def policy_entropy(
    params: AgentParams, env: Environment, questions: Sequence[Question]
) -> float:
    """Mean action-distribution entropy at the start state of each question."""
    total = 0.0
    with nn.no_grad():
        for question in questions:
            state = env.reset(question)
            carry = encode_history(params, state.history, state.q_embed, state.e_t_embed)
            actions = env.action_space(state)
            probs = nn.softmax(policy_logits(params, carry, actions))
            total += nn.entropy(probs).item()
    return total / max(len(questions), 1)
