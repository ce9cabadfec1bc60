"""Decoding: greedy walks, beam search over path probability, and answers.

A path's score is the sum of per-step log probabilities (the product rule in
log space).  Beam search keeps the top-``width`` partial paths per step,
breaking score ties by the lexicographic entity-id sequence, and merges
partials with identical entity sequences keeping the higher probability.
A question is answered "yes" iff any returned path contains the effect
entity at any position; unlinkable questions answer "no" by default.

Node-visit accounting unions the entities occupied by the kept beam
partials at every step (the expanded candidates).  STAY adds no entity by
construction, so it never inflates the count.

Everything here is read-only over the policy and graph, so questions can be
evaluated concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .agent import AgentParams, NetworkPolicy
from .env import Action, Environment, Question, make_question
from .graph import CausalEdge, CausalGraph, EntityId, link

REASON_LINKED = "linked"
REASON_UNLINKED = "unlinked"


@dataclass(frozen=True)
class ScoredPath:
    entities: tuple[EntityId, ...]
    log_prob: float
    step_probs: tuple[float, ...]
    edges: tuple[Optional[CausalEdge], ...]  # None marks a STAY step

    @property
    def probability(self) -> float:
        return float(np.exp(self.log_prob))

    def contains(self, e: EntityId) -> bool:
        return e in self.entities

    def to_record(self, graph: CausalGraph) -> dict:
        """Wire-format record with the provenance needed to verify each hop."""
        return {
            "entities": [graph.surface(e) for e in self.entities],
            "probability": self.probability,
            "sentences": [e.sentence if e is not None else None for e in self.edges],
            "source_urls": [e.source_url if e is not None else None for e in self.edges],
            "inverse": [e.is_inverse if e is not None else False for e in self.edges],
            "stay": [e is None for e in self.edges],
        }


@dataclass(frozen=True)
class BeamResult:
    paths: list[ScoredPath]
    visited: frozenset[EntityId]


@dataclass(frozen=True)
class Answer:
    verdict: str  # "yes" or "no"
    evidence: list[ScoredPath]
    reason: str  # REASON_LINKED or REASON_UNLINKED
    visited: int = 0

    @property
    def is_yes(self) -> bool:
        return self.verdict == "yes"


class FixedEdgePolicy:
    """Decoding policy driven by a (source, destination) → probability table.

    Surfaces are graph surface strings.  Probabilities are used verbatim
    (the caller is responsible for making each annotated node sum to one);
    nodes with no annotated mass fall back to uniform.  Useful for tests and
    for replaying a hand-specified policy.
    """

    def __init__(
        self,
        graph: CausalGraph,
        edge_probs: dict[tuple[str, str], float],
        stay_prob: float = 0.0,
    ):
        self.graph = graph
        self.table = {
            (link(graph, s), link(graph, t)): p for (s, t), p in edge_probs.items()
        }
        self.stay_prob = stay_prob

    def initial_carry(self):
        return None

    def advance(self, carry, state):
        return None

    def distribution(self, carry, state, actions: Sequence[Action]) -> np.ndarray:
        probs = np.zeros(len(actions))
        for i, action in enumerate(actions):
            if action.is_stay:
                probs[i] = self.stay_prob
            else:
                probs[i] = self.table.get((action.edge.src, action.edge.dst), 0.0)
        total = probs.sum()
        if total <= 0.0:
            return np.full(len(actions), 1.0 / len(actions))
        return probs


def _as_policy(policy_or_params):
    if isinstance(policy_or_params, AgentParams):
        return NetworkPolicy(policy_or_params)
    return policy_or_params


def _log(p: float) -> float:
    return float(np.log(p)) if p > 0.0 else float("-inf")


@dataclass
class _Partial:
    entities: tuple[EntityId, ...]
    log_prob: float
    step_probs: tuple[float, ...]
    edges: tuple[Optional[CausalEdge], ...]
    state: object
    carry: object


def greedy_path(policy_or_params, env: Environment, question: Question) -> ScoredPath:
    """Follow the highest-probability action at each step (lowest index on ties)."""
    policy = _as_policy(policy_or_params)
    state = env.reset(question)
    carry = policy.initial_carry()
    entities = [state.e_t]
    log_prob = 0.0
    step_probs: list[float] = []
    edges: list[Optional[CausalEdge]] = []
    for _ in range(env.T):
        carry = policy.advance(carry, state)
        actions = env.action_space(state)
        probs = policy.distribution(carry, state, actions)
        idx = int(np.argmax(probs))
        action = actions[idx]
        state, _ = env.step(state, action)
        entities.append(state.e_t)
        log_prob += _log(float(probs[idx]))
        step_probs.append(float(probs[idx]))
        edges.append(action.edge)
    return ScoredPath(tuple(entities), log_prob, tuple(step_probs), tuple(edges))


def beam_search(
    policy_or_params,
    env: Environment,
    question: Question,
    width: int | None,
) -> BeamResult:
    """Top-``width`` complete paths of length T ranked by log probability.

    ``width=None`` keeps every candidate (exhaustive enumeration of action
    sequences, after entity-sequence deduplication).
    """
    if width is not None and width < 1:
        raise ValueError("beam width must be >= 1")
    policy = _as_policy(policy_or_params)
    root = env.reset(question)
    beams = [
        _Partial(
            entities=(root.e_t,),
            log_prob=0.0,
            step_probs=(),
            edges=(),
            state=root,
            carry=policy.initial_carry(),
        )
    ]
    visited: set[EntityId] = {root.e_t}
    for _ in range(env.T):
        candidates: dict[tuple[EntityId, ...], _Partial] = {}
        for partial in beams:
            carry = policy.advance(partial.carry, partial.state)
            actions = env.action_space(partial.state)
            probs = policy.distribution(carry, partial.state, actions)
            for idx, action in enumerate(actions):
                new_state, _ = env.step(partial.state, action)
                seq = partial.entities + (new_state.e_t,)
                candidate = _Partial(
                    entities=seq,
                    log_prob=partial.log_prob + _log(float(probs[idx])),
                    step_probs=partial.step_probs + (float(probs[idx]),),
                    edges=partial.edges + (action.edge,),
                    state=new_state,
                    carry=carry,
                )
                best = candidates.get(seq)
                if best is None or candidate.log_prob > best.log_prob:
                    candidates[seq] = candidate
        ranked = sorted(candidates.values(), key=lambda p: (-p.log_prob, p.entities))
        beams = ranked if width is None else ranked[:width]
        for partial in beams:
            visited.add(partial.entities[-1])
    paths = [
        ScoredPath(p.entities, p.log_prob, p.step_probs, p.edges) for p in beams
    ]
    return BeamResult(paths=paths, visited=frozenset(visited))


def answer(
    policy_or_params,
    env: Environment,
    question_text: str,
    cause: str,
    effect: str,
    width: int | None = 50,
) -> Answer:
    """Yes/no verdict with ranked evidence paths and provenance.

    Unlinkable cause or effect answers "no" immediately; otherwise the beam
    is searched and the verdict is "yes" iff any path contains the effect
    entity at any position (a target visited and then left still answers
    the question).
    """
    graph = env.graph
    if link(graph, cause) is None or link(graph, effect) is None:
        return Answer(verdict="no", evidence=[], reason=REASON_UNLINKED, visited=0)
    question = make_question(graph, env.embedder, question_text, cause, effect)
    result = beam_search(policy_or_params, env, question, width)
    evidence = [p for p in result.paths if p.contains(question.e_e)]
    verdict = "yes" if evidence else "no"
    return Answer(
        verdict=verdict,
        evidence=evidence,
        reason=REASON_LINKED,
        visited=len(result.visited),
    )


def visited_nodes(paths: Sequence[ScoredPath]) -> int:
    """Unique entities across the given paths."""
    seen: set[EntityId] = set()
    for path in paths:
        seen.update(path.entities)
    return len(seen)
