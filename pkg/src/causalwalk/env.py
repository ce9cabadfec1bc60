"""Deterministic MDP over the causality graph.

States are value-like and independently advanceable; many rollouts may run
concurrently against the shared immutable graph.  An action is either a MOVE
along a cause edge (embedded as [sentence embedding ; destination entity
embedding]) or STAY (embedded as [zero vector ; current entity embedding]),
which keeps every episode at the fixed length T.  The only reward is the
terminal 0/1 signal at the last step when the walker sits on the effect.

The LSTM carry in the state is opaque to the environment: the policy encodes
it, ``step`` just threads it through.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Optional

import numpy as np

from .embed import VectorTable, embed_phrase
from .graph import CausalEdge, CausalGraph, EntityId, link

MOVE = "move"
STAY = "stay"


class LinkError(ValueError):
    """A question phrase could not be linked to the graph."""


@dataclass(frozen=True)
class Question:
    text: str
    q_embed: np.ndarray
    e_c: EntityId
    e_e: EntityId


@dataclass(frozen=True)
class EnvState:
    q_embed: np.ndarray
    e_t: EntityId
    e_t_embed: np.ndarray
    history: Any  # opaque (h, c) carry owned by the policy encoder
    e_e: EntityId
    t: int


@dataclass(frozen=True)
class Action:
    kind: str  # MOVE or STAY
    embed: np.ndarray  # length 2d
    edge: Optional[CausalEdge] = None

    @property
    def is_stay(self) -> bool:
        return self.kind == STAY


@dataclass(frozen=True)
class RolloutStep:
    state: EnvState
    action_index: int
    action: Action
    reward: float
    probs: np.ndarray


@dataclass(frozen=True)
class Rollout:
    question: Question
    steps: list[RolloutStep]

    @property
    def path(self) -> list[EntityId]:
        entities = [self.steps[0].state.e_t]
        for step in self.steps:
            edge = step.action.edge
            entities.append(edge.dst if edge is not None else entities[-1])
        return entities

    @property
    def rewards(self) -> np.ndarray:
        return np.asarray([s.reward for s in self.steps], dtype=np.float64)


class GraphEmbedder:
    """Caches entity and provenance-sentence embeddings for one graph."""

    def __init__(self, graph: CausalGraph, table: VectorTable):
        self.graph = graph
        self.table = table
        self.dim = table.dim
        self._entity = np.full((len(graph), table.dim), np.nan)
        self._entity_done = np.zeros(len(graph), dtype=bool)
        self._sentence: dict[str, np.ndarray] = {}

    def entity(self, e: EntityId) -> np.ndarray:
        if not self._entity_done[e]:
            self._entity[e] = embed_phrase(self.table, self.graph.surface(e))
            self._entity_done[e] = True
        return self._entity[e]

    def sentence(self, text: str) -> np.ndarray:
        vec = self._sentence.get(text)
        if vec is None:
            vec = embed_phrase(self.table, text)
            self._sentence[text] = vec
        return vec


def make_question(
    graph: CausalGraph, embedder: GraphEmbedder, text: str, cause: str, effect: str
) -> Question:
    e_c = link(graph, cause)
    e_e = link(graph, effect)
    if e_c is None:
        raise LinkError(f"cause phrase not in graph: {cause!r}")
    if e_e is None:
        raise LinkError(f"effect phrase not in graph: {effect!r}")
    return Question(
        text=text,
        q_embed=embed_phrase(embedder.table, text),
        e_c=e_c,
        e_e=e_e,
    )


class Environment:
    """The walker's MDP with rollout length ``T``.

    ``out_degree_cap`` optionally truncates action spaces to the cap's
    lowest-destination-id edges, for adversarial inputs; by default the full
    adjacency is exposed.
    """

    def __init__(
        self,
        graph: CausalGraph,
        embedder: GraphEmbedder,
        T: int,
        out_degree_cap: int | None = None,
    ):
        if T < 1:
            raise ValueError("rollout length T must be >= 1")
        self.graph = graph
        self.embedder = embedder
        self.T = T
        self.out_degree_cap = out_degree_cap

    @property
    def dim(self) -> int:
        return self.embedder.dim

    def zero_history(self) -> tuple[np.ndarray, np.ndarray]:
        hidden = 2 * self.dim
        return np.zeros(hidden), np.zeros(hidden)

    def reset(self, question: Question) -> EnvState:
        return EnvState(
            q_embed=question.q_embed,
            e_t=question.e_c,
            e_t_embed=self.embedder.entity(question.e_c),
            history=self.zero_history(),
            e_e=question.e_e,
            t=0,
        )

    def action_space(self, state: EnvState) -> list[Action]:
        """One MOVE per outgoing edge (adjacency order), then STAY last."""
        edges = self.graph.adjacency[state.e_t]
        if self.out_degree_cap is not None:
            edges = edges[: self.out_degree_cap]
        actions = [
            Action(
                kind=MOVE,
                embed=np.concatenate(
                    [self.embedder.sentence(e.sentence), self.embedder.entity(e.dst)]
                ),
                edge=e,
            )
            for e in edges
        ]
        actions.append(
            Action(
                kind=STAY,
                embed=np.concatenate([np.zeros(self.dim), state.e_t_embed]),
            )
        )
        return actions

    def step(
        self, state: EnvState, action: Action, history: Any = None
    ) -> tuple[EnvState, float]:
        """Deterministic transition; terminal reward 1 iff the walk ends on e_e.

        ``history`` is the policy's updated carry for the new state; when
        omitted, the previous carry is threaded through unchanged.
        """
        if state.t >= self.T:
            raise ValueError("episode already at its terminal step")
        if action.kind == MOVE:
            if action.edge is None or action.edge.src != state.e_t:
                raise ValueError("action does not belong to this state")
            e_next = action.edge.dst
        elif action.kind == STAY:
            e_next = state.e_t
        else:
            raise ValueError(f"unknown action kind {action.kind!r}")
        t_next = state.t + 1
        reward = 1.0 if (t_next == self.T and e_next == state.e_e) else 0.0
        new_state = EnvState(
            q_embed=state.q_embed,
            e_t=e_next,
            e_t_embed=self.embedder.entity(e_next),
            history=history if history is not None else state.history,
            e_e=state.e_e,
            t=t_next,
        )
        return new_state, reward
