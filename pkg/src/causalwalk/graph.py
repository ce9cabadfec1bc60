"""Causality graph: loading, entity linking, neighbors, and BFS oracles.

A graph is immutable after load and safe for unrestricted concurrent reads.
Entity ids are dense integers in order of first appearance; adjacency lists
are sorted by destination id so that iteration (and everything derived from
it: action spaces, demonstrations, tie-breaking) is deterministic.

Graph files are newline-delimited JSON records
``{"cause": ..., "effect": ..., "sentence": ..., "source_url": ...}``.
A sidecar ``<path>.manifest.json`` may declare expected ``lines`` /
``entities`` / ``relations`` counts, which are verified on load.
"""

from __future__ import annotations

import json
import os
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, TYPE_CHECKING

if TYPE_CHECKING:  # pragma: no cover
    from .data import QAExample

EntityId = int


class GraphLoadError(ValueError):
    """Raised for malformed graph files or manifest mismatches."""


@dataclass(frozen=True)
class CausalEdge:
    src: EntityId
    dst: EntityId
    sentence: str
    source_url: str = ""
    is_inverse: bool = False


@dataclass
class LoadStats:
    lines: int = 0
    entities: int = 0
    forward_edges: int = 0
    inverse_edges: int = 0
    duplicates_dropped: int = 0
    self_loops: int = 0


@dataclass(frozen=True)
class BfsResult:
    path: Optional[list[EntityId]]
    visited: int


def normalize(phrase: str) -> str:
    """Lowercase, trim, and collapse internal whitespace."""
    return " ".join(phrase.lower().split())


class CausalGraph:
    """Directed cause→effect graph over noun phrases with edge provenance."""

    def __init__(
        self,
        entities: list[str],
        adjacency: list[list[CausalEdge]],
        stats: LoadStats,
    ):
        self.entities = entities
        self.adjacency = adjacency
        self.surface_index = {surface: i for i, surface in enumerate(entities)}
        self.stats = stats

    def __len__(self) -> int:
        return len(self.entities)

    @property
    def num_edges(self) -> int:
        return sum(len(a) for a in self.adjacency)

    def surface(self, e: EntityId) -> str:
        return self.entities[e]

    def entity_digest(self) -> str:
        from . import nn

        return nn.digest_strings(self.entities)

    @classmethod
    def from_records(
        cls, records: Iterable[dict], add_inverse: bool = False
    ) -> "CausalGraph":
        entities: list[str] = []
        index: dict[str, EntityId] = {}
        stats = LoadStats()

        def intern(phrase: str) -> EntityId:
            key = normalize(phrase)
            eid = index.get(key)
            if eid is None:
                eid = len(entities)
                index[key] = eid
                entities.append(key)
            return eid

        adjacency: list[list[CausalEdge]] = []
        seen_pairs: set[tuple[EntityId, EntityId]] = set()
        forward: list[CausalEdge] = []
        for lineno, rec in enumerate(records, start=1):
            stats.lines += 1
            try:
                cause, effect, sentence = rec["cause"], rec["effect"], rec["sentence"]
            except (KeyError, TypeError) as exc:
                raise GraphLoadError(f"line {lineno}: missing field {exc}") from exc
            if not isinstance(cause, str) or not isinstance(effect, str):
                raise GraphLoadError(f"line {lineno}: cause/effect must be strings")
            src = intern(cause)
            dst = intern(effect)
            while len(adjacency) < len(entities):
                adjacency.append([])
            if (src, dst) in seen_pairs:
                stats.duplicates_dropped += 1
                continue
            seen_pairs.add((src, dst))
            if src == dst:
                stats.self_loops += 1
            edge = CausalEdge(src, dst, str(sentence), str(rec.get("source_url", "")))
            adjacency[src].append(edge)
            forward.append(edge)
            stats.forward_edges += 1

        if add_inverse:
            for edge in forward:
                pair = (edge.dst, edge.src)
                if pair in seen_pairs:
                    stats.duplicates_dropped += 1
                    continue
                seen_pairs.add(pair)
                adjacency[edge.dst].append(
                    CausalEdge(edge.dst, edge.src, edge.sentence, edge.source_url, True)
                )
                stats.inverse_edges += 1

        for edges in adjacency:
            edges.sort(key=lambda e: e.dst)
        stats.entities = len(entities)
        return cls(entities, adjacency, stats)


def load_graph(
    path,
    add_inverse: bool,
    expected_entities: int | None = None,
    expected_edges: int | None = None,
) -> CausalGraph:
    """Load a newline-delimited graph file, verifying any manifest counts."""

    def records():
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    yield json.loads(line)
                except json.JSONDecodeError as exc:
                    raise GraphLoadError(f"{path}: line {lineno}: {exc}") from exc

    graph = CausalGraph.from_records(records(), add_inverse=add_inverse)
    manifest_path = f"{path}.manifest.json"
    if os.path.exists(manifest_path):
        with open(manifest_path, "r", encoding="utf-8") as fh:
            manifest = json.load(fh)
        checks = {
            "lines": graph.stats.lines,
            "entities": graph.stats.entities,
            "relations": graph.stats.forward_edges,
        }
        for key, actual in checks.items():
            expected = manifest.get(key)
            if expected is not None and expected != actual:
                raise GraphLoadError(
                    f"{path}: manifest {key}={expected} but loaded {actual}"
                )
    if expected_entities is not None and len(graph) != expected_entities:
        raise GraphLoadError(
            f"{path}: expected {expected_entities} entities, loaded {len(graph)}"
        )
    if expected_edges is not None and graph.stats.forward_edges != expected_edges:
        raise GraphLoadError(
            f"{path}: expected {expected_edges} forward edges, "
            f"loaded {graph.stats.forward_edges}"
        )
    return graph


def link(graph: CausalGraph, phrase: str) -> Optional[EntityId]:
    """Exact-string entity linking after normalization; None when absent."""
    return graph.surface_index.get(normalize(phrase))


def neighbors(graph: CausalGraph, e: EntityId) -> Sequence[CausalEdge]:
    if not 0 <= e < len(graph.entities):
        raise ValueError(f"invalid entity id {e}")
    return graph.adjacency[e]


def bfs_shortest_path(
    graph: CausalGraph, src: EntityId, dst: EntityId, max_hops: int
) -> BfsResult:
    """Shortest path of length ≤ max_hops, or None.

    Among equal-length paths the successive entity ids are lexicographically
    smallest; with adjacency sorted by destination id, first-discovery parent
    assignment yields exactly that path.  ``visited`` counts unique dequeued
    nodes; the search stops as soon as the target is discovered.
    """
    if not 0 <= src < len(graph.entities) or not 0 <= dst < len(graph.entities):
        raise ValueError("invalid entity id")
    if max_hops < 1:
        raise ValueError("max_hops must be >= 1")
    if src == dst:
        return BfsResult(path=[src], visited=1)

    parent: dict[EntityId, EntityId] = {src: src}
    depth = {src: 0}
    queue: deque[EntityId] = deque([src])
    visited = 0
    while queue:
        node = queue.popleft()
        visited += 1
        if depth[node] >= max_hops:
            continue
        for edge in graph.adjacency[node]:
            if edge.dst in parent:
                continue
            parent[edge.dst] = node
            depth[edge.dst] = depth[node] + 1
            if edge.dst == dst:
                path = [dst]
                while path[-1] != src:
                    path.append(parent[path[-1]])
                path.reverse()
                return BfsResult(path=path, visited=visited)
            queue.append(edge.dst)
    return BfsResult(path=None, visited=visited)


def bfs_answer(
    graph: CausalGraph, question: "QAExample", max_hops: int
) -> tuple[bool, int]:
    """Exhaustive BFS baseline: yes iff both phrases link and a path ≤ max_hops exists.

    The search expands everything within ``max_hops`` regardless of when the
    target is found — that is the baseline whose node count the agent is
    compared against.  Unlinkable cause or effect answers no with visited=0.
    """
    src = link(graph, question.cause_phrase)
    dst = link(graph, question.effect_phrase)
    if src is None or dst is None:
        return False, 0
    depth = {src: 0}
    queue: deque[EntityId] = deque([src])
    visited = 0
    found = src == dst
    while queue:
        node = queue.popleft()
        visited += 1
        if depth[node] >= max_hops:
            continue
        for edge in graph.adjacency[node]:
            if edge.dst in depth:
                continue
            depth[edge.dst] = depth[node] + 1
            if edge.dst == dst:
                found = True
            queue.append(edge.dst)
    return found, visited
