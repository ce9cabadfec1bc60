"""Scoring and experiment drivers: agent-vs-BFS comparisons and sweeps.

``score`` is a pure function of aligned prediction/gold label maps, so
permuting question order cannot change any metric.  ``run_eval`` evaluates
the agent (per hop count) and the exhaustive BFS baseline on identical
questions, reporting accuracy/F1/recall/precision plus the average number
of unique visited nodes and the agent/BFS pruning ratio.  Sweeps rerun
training under a grid of supervised-step counts (or re-decode one run at
several beam widths) and return step-indexed curves.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Mapping, Optional, Sequence

from .agent import AgentConfig, AgentParams, NetworkPolicy, init_params
from .data import QAExample
from .env import Environment, GraphEmbedder, make_question
from .graph import CausalGraph, bfs_answer, link
from .infer import answer as agent_answer
from .train import train_loop


@dataclass(frozen=True)
class Confusion:
    tp: int
    fn: int
    fp: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fn + self.fp + self.tn


@dataclass(frozen=True)
class MetricsRow:
    accuracy: float
    f1: float
    recall: float
    precision: float
    avg_nodes: float = 0.0
    degenerate: bool = False


def metrics_from_confusion(confusion: Confusion, avg_nodes: float = 0.0) -> MetricsRow:
    """Standard binary classification measures from a confusion table.

    Zero-denominator precision/recall are reported as 0 with the degenerate
    flag set.
    """
    tp, fn, fp, tn = confusion.tp, confusion.fn, confusion.fp, confusion.tn
    total = confusion.total
    accuracy = (tp + tn) / total if total else 0.0
    degenerate = False
    if tp + fp > 0:
        precision = tp / (tp + fp)
    else:
        precision, degenerate = 0.0, True
    if tp + fn > 0:
        recall = tp / (tp + fn)
    else:
        recall, degenerate = 0.0, True
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return MetricsRow(
        accuracy=accuracy,
        f1=f1,
        recall=recall,
        precision=precision,
        avg_nodes=avg_nodes,
        degenerate=degenerate,
    )


def score(
    predictions: Mapping[str, str],
    gold: Mapping[str, str],
    visited: Mapping[str, int] | None = None,
) -> tuple[Confusion, MetricsRow]:
    """Confusion table and metrics for id-aligned yes/no labels."""
    if set(predictions) != set(gold):
        raise ValueError("prediction and gold ids do not align")
    tp = fn = fp = tn = 0
    for qid, pred in predictions.items():
        truth = gold[qid]
        if truth == "yes":
            if pred == "yes":
                tp += 1
            else:
                fn += 1
        else:
            if pred == "yes":
                fp += 1
            else:
                tn += 1
    confusion = Confusion(tp=tp, fn=fn, fp=fp, tn=tn)
    avg_nodes = 0.0
    if visited:
        avg_nodes = sum(visited.values()) / len(visited)
    return confusion, metrics_from_confusion(confusion, avg_nodes)


@dataclass(frozen=True)
class EvalRow:
    method: str  # "agent" or "bfs"
    hops: int
    confusion: Confusion
    metrics: MetricsRow
    pruning_ratio: Optional[float] = None  # agent nodes / BFS nodes, same hops
    label: str = ""


@dataclass(frozen=True)
class EvalReport:
    rows: list[EvalRow]

    def find(self, method: str, hops: int) -> EvalRow:
        for row in self.rows:
            if row.method == method and row.hops == hops:
                return row
        raise KeyError(f"no row for {method} {hops}-hop")


def _agent_predictions(
    policy,
    env: Environment,
    questions: Sequence[QAExample],
    width: int | None,
    threads: int = 1,
) -> tuple[dict[str, str], dict[str, int]]:
    def solve(ex: QAExample) -> tuple[str, int]:
        result = agent_answer(
            policy, env, ex.question_text, ex.cause_phrase, ex.effect_phrase, width
        )
        return result.verdict, result.visited

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            solved = list(pool.map(solve, questions))
    else:
        solved = [solve(ex) for ex in questions]
    predictions = {ex.id: verdict for ex, (verdict, _) in zip(questions, solved)}
    visited = {ex.id: count for ex, (_, count) in zip(questions, solved)}
    return predictions, visited


def run_eval(
    graph: CausalGraph,
    embedder: GraphEmbedder,
    questions: Sequence[QAExample],
    params: AgentParams | None = None,
    hops: Sequence[int] = (1, 2, 3, 4),
    beam_width: int | None = 50,
    greedy: bool = False,
    include_bfs: bool = True,
    threads: int = 1,
    agent_label: str = "agent",
) -> EvalReport:
    """Evaluate the agent and/or BFS baseline per hop count on one question set.

    ``greedy`` decodes with beam width 1 (the greedy ablation); the other
    ablations (no-supervised, no-critic, no-inverse-edges, no-LSTM) are
    selected by what is passed in: the checkpoint and the graph.
    """
    gold = {ex.id: ex.label for ex in questions}
    rows: list[EvalRow] = []
    width = 1 if greedy else beam_width
    bfs_nodes: dict[int, float] = {}
    if include_bfs:
        for T in hops:
            predictions = {}
            visited = {}
            for ex in questions:
                verdict, count = bfs_answer(graph, ex, T)
                predictions[ex.id] = "yes" if verdict else "no"
                visited[ex.id] = count
            confusion, metrics = score(predictions, gold, visited)
            bfs_nodes[T] = metrics.avg_nodes
            rows.append(
                EvalRow(
                    method="bfs", hops=T, confusion=confusion, metrics=metrics, label="bfs"
                )
            )
    if params is not None:
        policy = NetworkPolicy(params)
        for T in hops:
            env = Environment(graph, embedder, T)
            predictions, visited = _agent_predictions(
                policy, env, questions, width, threads
            )
            confusion, metrics = score(predictions, gold, visited)
            ratio = None
            if T in bfs_nodes and bfs_nodes[T] > 0:
                ratio = metrics.avg_nodes / bfs_nodes[T]
            rows.append(
                EvalRow(
                    method="agent",
                    hops=T,
                    confusion=confusion,
                    metrics=metrics,
                    pruning_ratio=ratio,
                    label=agent_label,
                )
            )
    return EvalReport(rows=rows)


def accuracy_eval_fn(
    embedder: GraphEmbedder,
    questions: Sequence[QAExample],
    hops: int,
    width: int | None,
    prefix: str = "",
):
    """Build a train_loop eval hook that reports test accuracy under one width."""

    def evaluate(params: AgentParams, step: int) -> dict:
        env = Environment(embedder.graph, embedder, hops)
        policy = NetworkPolicy(params)
        predictions, _ = _agent_predictions(policy, env, questions, width)
        gold = {ex.id: ex.label for ex in questions}
        _, metrics = score(predictions, gold)
        key = f"{prefix}accuracy" if prefix else "accuracy"
        return {key: metrics.accuracy}

    return evaluate


def sweep_supervised(
    graph: CausalGraph,
    embedder: GraphEmbedder,
    train_questions,
    eval_questions: Sequence[QAExample],
    config: AgentConfig,
    supervised_grid: Sequence[int] = (0, 100, 200, 300),
) -> dict[int, list[dict]]:
    """Accuracy/entropy/unique-path curves per supervised-step setting.

    Every run shares the seed and differs only in the number of supervised
    bootstrap steps; records carry one row per logged step.
    """
    curves: dict[int, list[dict]] = {}
    for supervised_steps in supervised_grid:
        run_config = replace(config, supervised_steps=supervised_steps)
        env = Environment(graph, embedder, run_config.T, run_config.out_degree_cap)
        eval_fn = accuracy_eval_fn(
            embedder, eval_questions, run_config.T, run_config.beam_width
        )
        _, records = train_loop(
            env, train_questions, run_config, eval_fn=eval_fn
        )
        curves[supervised_steps] = [r for r in records if r["phase"] == "rl"]
    return curves


def sweep_beam_width(
    graph: CausalGraph,
    embedder: GraphEmbedder,
    train_questions,
    eval_questions: Sequence[QAExample],
    config: AgentConfig,
    widths: Sequence[int] = (1, 5, 10, 50),
) -> dict[int, list[dict]]:
    """Accuracy-vs-steps curves for several decode widths from a single run."""
    env = Environment(graph, embedder, config.T, config.out_degree_cap)
    hooks = [
        (w, accuracy_eval_fn(embedder, eval_questions, config.T, w, prefix=f"w{w}_"))
        for w in widths
    ]

    def eval_all(params: AgentParams, step: int) -> dict:
        merged: dict = {}
        for _, fn in hooks:
            merged.update(fn(params, step))
        return merged

    _, records = train_loop(env, train_questions, config, eval_fn=eval_all)
    rl_records = [r for r in records if r["phase"] == "rl"]
    curves: dict[int, list[dict]] = {}
    for w, _ in hooks:
        key = f"w{w}_accuracy"
        curves[w] = [
            {"step": r["step"], "accuracy": r[key], "entropy": r["entropy"],
             "unique_paths": r["unique_paths"]}
            for r in rl_records
            if key in r
        ]
    return curves


def linked_training_questions(
    graph: CausalGraph, embedder: GraphEmbedder, examples: Sequence[QAExample]
):
    """Materialize env Questions for examples that are positive and linked."""
    questions = []
    for ex in examples:
        if ex.label != "yes":
            continue
        if link(graph, ex.cause_phrase) is None or link(graph, ex.effect_phrase) is None:
            continue
        questions.append(
            make_question(graph, embedder, ex.question_text, ex.cause_phrase, ex.effect_phrase)
        )
    return questions
