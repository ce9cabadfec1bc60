"""Command-line entry point: extract, train, eval, answer, sweep.

Configuration precedence is defaults < ``--config`` file (flat key=value
lines) < explicit flags.  Every run writes a resolved-config record with all
defaults materialized, so a run can be reproduced exactly; identical config
plus seed yields byte-identical checkpoints.

Exit codes: 0 success, 1 runtime failure (message names the offending
path), 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import fields
from pathlib import Path

from . import agent as agent_mod
from . import data as data_mod
from . import evaluation, infer, report
from .agent import AgentConfig, NetworkPolicy, load_checkpoint, save_checkpoint
from .embed import load_word_vectors
from .env import Environment, GraphEmbedder
from .graph import load_graph
from .train import train_loop

_CONFIG_FLAGS = {
    "steps": int,
    "batch_size": int,
    "lr": float,
    "gamma": float,
    "gae_lambda": float,
    "entropy_beta": float,
    "supervised_steps": int,
    "supervised_batch": int,
    "alpha": float,
    "beam_width": int,
    "hops": int,
    "hidden_dim": int,
    "weight_decay": float,
    "seed": int,
    "log_every": int,
    "eval_every": int,
    "checkpoint_every": int,
}

# CLI flag name -> AgentConfig field
_FIELD_OF = {
    "gae_lambda": "lam",
    "hops": "T",
    "hidden_dim": "h",
}


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    for flag, typ in _CONFIG_FLAGS.items():
        parser.add_argument(f"--{flag.replace('_', '-')}", type=typ, default=None)
    parser.add_argument("--no-lstm", action="store_true", default=None)
    parser.add_argument("--no-critic", action="store_true", default=None)
    parser.add_argument("--no-inverse-edges", action="store_true", default=None)
    parser.add_argument("--greedy", action="store_true", default=None)
    parser.add_argument("--config", type=Path, default=None, help="flat key=value file")
    parser.add_argument("--threads", type=int, default=1)


def _parse_config_file(path: Path) -> dict:
    values: dict = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value")
        key, raw = (part.strip() for part in line.split("=", 1))
        values[key] = raw
    return values


_CONFIG_BOOLS = {"no_lstm": "use_lstm", "no_critic": "use_critic"}


def _resolve_config(args: argparse.Namespace) -> tuple[AgentConfig, dict]:
    """Merge defaults, config file, and explicit flags into one AgentConfig."""
    config = AgentConfig()
    extras = {"add_inverse": True, "greedy": False}
    if args.config is not None:
        file_values = _parse_config_file(args.config)
        known = {f.name: f.type for f in fields(AgentConfig)}
        overrides = {}
        for key, raw in file_values.items():
            field_name = _FIELD_OF.get(key, key)
            if field_name in ("use_lstm", "use_critic", "add_inverse", "greedy"):
                value = raw.lower() in ("1", "true", "yes")
                if field_name in ("add_inverse", "greedy"):
                    extras[field_name] = value
                else:
                    overrides[field_name] = value
            elif field_name in known:
                current = getattr(config, field_name)
                overrides[field_name] = type(current)(raw) if current is not None else raw
            else:
                raise ValueError(f"{args.config}: unknown config key {key!r}")
        config = config.override(**overrides)
    flag_overrides = {}
    for flag in _CONFIG_FLAGS:
        value = getattr(args, flag, None)
        if value is not None:
            flag_overrides[_FIELD_OF.get(flag, flag)] = value
    if getattr(args, "no_lstm", None):
        flag_overrides["use_lstm"] = False
    if getattr(args, "no_critic", None):
        flag_overrides["use_critic"] = False
    config = config.override(**flag_overrides)
    if getattr(args, "no_inverse_edges", None):
        extras["add_inverse"] = False
    if getattr(args, "greedy", None):
        extras["greedy"] = True
    return config, extras


def _write_resolved_config(
    out_dir: Path, config: AgentConfig, extras: dict, inputs: dict
) -> None:
    lines = []
    for key, value in sorted({**config.to_dict(), **extras, **inputs}.items()):
        lines.append(f"{key}={value}")
    (out_dir / "resolved_config.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")


def _load_inputs(args, config: AgentConfig, extras: dict):
    graph = load_graph(args.graph, add_inverse=extras["add_inverse"])
    table = load_word_vectors(args.vectors)
    if table.dim != config.d:
        config = config.override(d=table.dim)
    embedder = GraphEmbedder(graph, table)
    return graph, embedder, config


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="causalwalk",
        description="Answer binary causal questions over a causality graph "
        "with a trained walker agent and a BFS baseline.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_extract = sub.add_parser("extract", help="mine binary causal questions from a corpus")
    p_extract.add_argument("--corpus", type=Path, required=True, help="NDJSON question corpus")
    p_extract.add_argument("--out", type=Path, required=True, help="output dataset TSV")
    p_extract.add_argument("--split", default="train", help="split tag for untagged records")
    p_extract.add_argument("--cue-words", type=Path, default=None)
    p_extract.add_argument("--question-words", type=Path, default=None)
    p_extract.add_argument("--excluded-pos", type=Path, default=None)

    p_train = sub.add_parser("train", help="train the walker agent")
    p_train.add_argument("--graph", type=Path, required=True)
    p_train.add_argument("--vectors", type=Path, required=True)
    p_train.add_argument("--dataset", type=Path, required=True)
    p_train.add_argument("--out", type=Path, required=True, help="output directory")
    _add_config_flags(p_train)

    p_eval = sub.add_parser("eval", help="score the agent and BFS baseline on a test set")
    p_eval.add_argument("--graph", type=Path, required=True)
    p_eval.add_argument("--vectors", type=Path, required=True)
    p_eval.add_argument("--dataset", type=Path, required=True)
    p_eval.add_argument(
        "--checkpoint", type=Path, action="append", default=None,
        help="trained checkpoint (repeat for per-seed rows plus a mean row)",
    )
    p_eval.add_argument("--out", type=Path, required=True)
    p_eval.add_argument("--eval-hops", default="1,2,3,4", help="comma-separated hop counts")
    p_eval.add_argument("--no-bfs", action="store_true")
    _add_config_flags(p_eval)

    p_answer = sub.add_parser("answer", help="answer questions with evidence paths")
    p_answer.add_argument("--graph", type=Path, required=True)
    p_answer.add_argument("--vectors", type=Path, required=True)
    p_answer.add_argument("--checkpoint", type=Path, required=True)
    p_answer.add_argument("--question", action="append", default=None)
    p_answer.add_argument("--questions-file", type=Path, default=None)
    p_answer.add_argument("--cause", default=None, help="override extracted cause phrase")
    p_answer.add_argument("--effect", default=None, help="override extracted effect phrase")
    p_answer.add_argument("--out", type=Path, default=None, help="NDJSON output (default stdout)")
    _add_config_flags(p_answer)

    p_sweep = sub.add_parser("sweep", help="supervised-step or beam-width grids")
    p_sweep.add_argument("--graph", type=Path, required=True)
    p_sweep.add_argument("--vectors", type=Path, required=True)
    p_sweep.add_argument("--dataset", type=Path, required=True)
    p_sweep.add_argument("--out", type=Path, required=True)
    p_sweep.add_argument("--mode", choices=("supervised", "beam"), default="supervised")
    p_sweep.add_argument("--grid", default=None, help="comma-separated grid values")
    _add_config_flags(p_sweep)

    return parser


def _cmd_extract(args) -> int:
    if args.cue_words or args.question_words or args.excluded_pos:
        defaults = data_mod.CueLexicon.default()

        def lines(path, fallback):
            return path.read_text(encoding="utf-8").splitlines() if path else fallback

        lexicon = data_mod.CueLexicon.from_lines(
            lines(args.cue_words, defaults.raw_cue_lines()),
            lines(args.question_words, list(defaults.question_words)),
            lines(args.excluded_pos, sorted(defaults.excluded_pos)),
        )
    else:
        lexicon = data_mod.CueLexicon.default()

    def records():
        with open(args.corpus, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    yield json.loads(line)

    examples, stats = data_mod.extract_questions(records(), lexicon, default_split=args.split)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    data_mod.write_dataset(args.out, examples)
    summary = data_mod.corpus_stats(examples)
    print(
        f"extracted {stats.extracted}/{stats.total} questions "
        f"(no pattern: {stats.no_pattern}, POS-excluded: {stats.excluded_pos}, "
        f"bad answer: {stats.bad_answer}, multi-cue flagged: {stats.multi_cue})"
    )
    if not summary.empty:
        print(f"mean length: {summary.mean_chars:.1f} chars, {summary.mean_words:.1f} words")
    return 0


def _cmd_train(args) -> int:
    config, extras = _resolve_config(args)
    graph, embedder, config = _load_inputs(args, config, extras)
    examples = data_mod.read_dataset(args.dataset)
    effective = data_mod.filter_training_set(graph, examples)
    questions = evaluation.linked_training_questions(graph, embedder, effective)
    args.out.mkdir(parents=True, exist_ok=True)
    _write_resolved_config(
        args.out,
        config,
        extras,
        {"graph": args.graph, "vectors": args.vectors, "dataset": args.dataset},
    )
    env = Environment(graph, embedder, config.T, config.out_degree_cap)
    params, records = train_loop(
        env,
        questions,
        config,
        log_path=args.out / "metrics.ndjson",
        checkpoint_dir=args.out if config.checkpoint_every else None,
        progress=lambda r: print(
            f"[{r['phase']}] step {r['step']} "
            f"loss={r['policy_loss']:.4f} entropy={r['entropy']:.4f}"
        ),
    )
    save_checkpoint(
        args.out / "checkpoint.bin", params, config, graph.entity_digest(), len(graph)
    )
    report.save_training_curves(records, args.out / "training_curves.png")
    print(f"effective training questions: {len(questions)}")
    print(f"wrote {args.out / 'checkpoint.bin'}")
    return 0


def _mean_row(rows: list[evaluation.EvalRow]) -> evaluation.EvalRow:
    n = len(rows)
    metrics = evaluation.MetricsRow(
        accuracy=sum(r.metrics.accuracy for r in rows) / n,
        f1=sum(r.metrics.f1 for r in rows) / n,
        recall=sum(r.metrics.recall for r in rows) / n,
        precision=sum(r.metrics.precision for r in rows) / n,
        avg_nodes=sum(r.metrics.avg_nodes for r in rows) / n,
    )
    ratios = [r.pruning_ratio for r in rows if r.pruning_ratio is not None]
    return evaluation.EvalRow(
        method="agent",
        hops=rows[0].hops,
        confusion=rows[0].confusion,
        metrics=metrics,
        pruning_ratio=sum(ratios) / len(ratios) if ratios else None,
        label="agent-mean",
    )


def _cmd_eval(args) -> int:
    config, extras = _resolve_config(args)
    graph, embedder, config = _load_inputs(args, config, extras)
    examples = data_mod.read_dataset(args.dataset)
    hops = [int(h) for h in args.eval_hops.split(",") if h]
    rows: list[evaluation.EvalRow] = []
    base = evaluation.run_eval(
        graph,
        embedder,
        examples,
        params=None,
        hops=hops,
        include_bfs=not args.no_bfs,
        threads=args.threads,
    )
    rows.extend(base.rows)
    bfs_nodes = {r.hops: r.metrics.avg_nodes for r in base.rows if r.method == "bfs"}
    checkpoints = args.checkpoint or []
    per_seed: dict[int, list[evaluation.EvalRow]] = {}
    for ckpt in checkpoints:
        params, _ = load_checkpoint(ckpt)
        agent_report = evaluation.run_eval(
            graph,
            embedder,
            examples,
            params=params,
            hops=hops,
            beam_width=config.beam_width,
            greedy=extras["greedy"],
            include_bfs=False,
            threads=args.threads,
            agent_label=f"agent[{Path(ckpt).stem}]" if len(checkpoints) > 1 else "agent",
        )
        for row in agent_report.rows:
            ratio = None
            if row.hops in bfs_nodes and bfs_nodes[row.hops] > 0:
                ratio = row.metrics.avg_nodes / bfs_nodes[row.hops]
            row = evaluation.EvalRow(
                method=row.method,
                hops=row.hops,
                confusion=row.confusion,
                metrics=row.metrics,
                pruning_ratio=ratio,
                label=row.label,
            )
            rows.append(row)
            per_seed.setdefault(row.hops, []).append(row)
    if len(checkpoints) > 1:
        for hop_rows in per_seed.values():
            rows.append(_mean_row(hop_rows))
    final = evaluation.EvalReport(rows=rows)
    args.out.mkdir(parents=True, exist_ok=True)
    _write_resolved_config(
        args.out,
        config,
        extras,
        {"graph": args.graph, "vectors": args.vectors, "dataset": args.dataset},
    )
    report.write_metrics_tsv(final, args.out / "metrics.tsv")
    report.write_confusion_tsv(final, args.out / "confusion.tsv")
    report.save_eval_summary(final, args.out / "eval_summary.png")
    for row in final.rows:
        print(
            f"{row.label or row.method}\t{row.hops}-hop\t"
            f"A={row.metrics.accuracy:.3f} F1={row.metrics.f1:.3f} "
            f"R={row.metrics.recall:.3f} P={row.metrics.precision:.3f} "
            f"|Nodes|={row.metrics.avg_nodes:.2f}"
        )
    return 0


def _cmd_answer(args) -> int:
    config, extras = _resolve_config(args)
    graph, embedder, config = _load_inputs(args, config, extras)
    params, _ = load_checkpoint(args.checkpoint)
    env = Environment(graph, embedder, config.T, config.out_degree_cap)
    policy = NetworkPolicy(params)
    lexicon = data_mod.CueLexicon.default()
    width = 1 if extras["greedy"] else config.beam_width

    questions: list[str] = list(args.question or [])
    if args.questions_file is not None:
        questions.extend(
            line.strip()
            for line in args.questions_file.read_text(encoding="utf-8").splitlines()
            if line.strip()
        )
    if not questions and not sys.stdin.isatty():
        questions = [line.strip() for line in sys.stdin if line.strip()]
    if not questions:
        raise ValueError("no questions given (use --question, --questions-file, or stdin)")

    out_fh = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    try:
        for text in questions:
            cause, effect = args.cause, args.effect
            if cause is None or effect is None:
                extracted, _ = data_mod.extract_questions(
                    [{"id": "q", "question": text, "answer": "yes"}], lexicon
                )
                if extracted:
                    cause = cause or extracted[0].cause_phrase
                    effect = effect or extracted[0].effect_phrase
            if cause is None or effect is None:
                record = {"question": text, "verdict": "no", "reason": "unparsed", "paths": []}
            else:
                result = infer.answer(policy, env, text, cause, effect, width)
                record = {
                    "question": text,
                    "verdict": result.verdict,
                    "reason": result.reason,
                    "paths": [p.to_record(graph) for p in result.evidence],
                }
            out_fh.write(json.dumps(record) + "\n")
    finally:
        if args.out:
            out_fh.close()
    return 0


def _cmd_sweep(args) -> int:
    config, extras = _resolve_config(args)
    graph, embedder, config = _load_inputs(args, config, extras)
    if not config.eval_every:
        config = config.override(eval_every=config.log_every)
    examples = data_mod.read_dataset(args.dataset)
    effective = data_mod.filter_training_set(graph, examples)
    train_questions = evaluation.linked_training_questions(graph, embedder, effective)
    eval_questions = [ex for ex in examples if ex.split == "test"] or examples
    args.out.mkdir(parents=True, exist_ok=True)
    _write_resolved_config(
        args.out,
        config,
        extras,
        {
            "graph": args.graph,
            "vectors": args.vectors,
            "dataset": args.dataset,
            "mode": args.mode,
            "grid": args.grid or "",
        },
    )
    if args.mode == "supervised":
        grid = [int(v) for v in (args.grid or "0,100,200,300").split(",")]
        curves = evaluation.sweep_supervised(
            graph, embedder, train_questions, eval_questions, config, grid
        )
        label = "supervised steps"
    else:
        grid = [int(v) for v in (args.grid or "1,5,10,50").split(",")]
        curves = evaluation.sweep_beam_width(
            graph, embedder, train_questions, eval_questions, config, grid
        )
        label = "beam width"
    for metric in ("accuracy", "entropy", "unique_paths"):
        report.write_curves_tsv(curves, metric, args.out / f"sweep_{metric}.tsv")
        report.save_sweep_curves(
            curves, metric, args.out / f"sweep_{metric}.png", setting_label=label
        )
    print(f"swept {label}: {grid}; curves written to {args.out}")
    return 0


_COMMANDS = {
    "extract": _cmd_extract,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "answer": _cmd_answer,
    "sweep": _cmd_sweep,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (OSError, ValueError, KeyError) as exc:
        print(f"causalwalk {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
