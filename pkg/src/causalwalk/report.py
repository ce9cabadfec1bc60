"""Render metric tables and training/sweep curves to delimited files and PNGs.

Every report path writes the tab-separated data first and then a matplotlib
figure next to it, so results stay plottable elsewhere while remaining
readable at a glance.
"""

from __future__ import annotations

import csv
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .evaluation import EvalReport

_RC = {
    "figure.dpi": 150,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 9,
    "legend.fontsize": 8,
}


def write_metrics_tsv(report: EvalReport, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, delimiter="\t", lineterminator="\n")
        writer.writerow(
            ["method", "hops", "accuracy", "f1", "recall", "precision", "nodes", "pruning_ratio"]
        )
        for row in report.rows:
            writer.writerow(
                [
                    row.label or row.method,
                    row.hops,
                    f"{row.metrics.accuracy:.4f}",
                    f"{row.metrics.f1:.4f}",
                    f"{row.metrics.recall:.4f}",
                    f"{row.metrics.precision:.4f}",
                    f"{row.metrics.avg_nodes:.2f}",
                    f"{row.pruning_ratio:.4f}" if row.pruning_ratio is not None else "",
                ]
            )


def write_confusion_tsv(report: EvalReport, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, delimiter="\t", lineterminator="\n")
        writer.writerow(["method", "hops", "tp", "fn", "fp", "tn"])
        for row in report.rows:
            c = row.confusion
            writer.writerow([row.label or row.method, row.hops, c.tp, c.fn, c.fp, c.tn])


def save_eval_summary(report: EvalReport, path) -> None:
    """Accuracy/F1 bars plus visited-node counts (log scale) per method and hops."""
    with plt.rc_context(_RC):
        fig, (ax_acc, ax_nodes) = plt.subplots(1, 2, figsize=(9, 3.4))
        labels = [f"{row.label or row.method}-{row.hops}" for row in report.rows]
        x = range(len(report.rows))
        ax_acc.bar(
            [i - 0.2 for i in x],
            [row.metrics.accuracy for row in report.rows],
            width=0.4,
            label="accuracy",
        )
        ax_acc.bar(
            [i + 0.2 for i in x],
            [row.metrics.f1 for row in report.rows],
            width=0.4,
            label="F1",
        )
        ax_acc.set_xticks(list(x), labels, rotation=45, ha="right")
        ax_acc.set_ylim(0, 1)
        ax_acc.legend()
        ax_acc.set_title("answer quality")
        nodes = [max(row.metrics.avg_nodes, 1e-2) for row in report.rows]
        ax_nodes.bar(list(x), nodes, color="tab:orange")
        ax_nodes.set_yscale("log")
        ax_nodes.set_xticks(list(x), labels, rotation=45, ha="right")
        ax_nodes.set_title("visited nodes per question")
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)


def save_training_curves(records: Sequence[Mapping], path) -> None:
    """Loss, entropy and unique-path panels over the whole training run."""
    rl = [r for r in records if r.get("phase") == "rl"]
    sup = [r for r in records if r.get("phase") == "supervised"]
    with plt.rc_context(_RC):
        fig, axes = plt.subplots(1, 3, figsize=(11, 3.2))
        if sup:
            axes[0].plot(
                [r["step"] for r in sup],
                [r["policy_loss"] for r in sup],
                label="supervised",
                color="tab:gray",
            )
        if rl:
            axes[0].plot(
                [r["step"] for r in rl], [r["policy_loss"] for r in rl], label="policy"
            )
            values = [(r["step"], r["value_loss"]) for r in rl if r["value_loss"] is not None]
            if values:
                axes[0].plot(*zip(*values), label="value")
        axes[0].set_xlabel("step")
        axes[0].set_title("loss")
        axes[0].legend()
        for source, label in ((sup, "supervised"), (rl, "rl")):
            if source:
                axes[1].plot(
                    [r["step"] for r in source], [r["entropy"] for r in source], label=label
                )
        axes[1].set_xlabel("step")
        axes[1].set_title("policy entropy")
        axes[1].legend()
        if rl:
            axes[2].plot([r["step"] for r in rl], [r["unique_paths"] for r in rl])
        axes[2].set_xlabel("RL step")
        axes[2].set_title("unique paths explored")
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)


def write_curves_tsv(curves: Mapping[int, Sequence[Mapping]], metric: str, path) -> None:
    """One row per logged step per grid setting."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, delimiter="\t", lineterminator="\n")
        writer.writerow(["setting", "step", metric])
        for setting in sorted(curves):
            for record in curves[setting]:
                if metric in record and record[metric] is not None:
                    writer.writerow([setting, record["step"], record[metric]])


def save_sweep_curves(
    curves: Mapping[int, Sequence[Mapping]],
    metric: str,
    path,
    setting_label: str = "supervised steps",
) -> None:
    """Metric-vs-RL-steps, one line per grid setting."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(5.2, 3.4))
        for setting in sorted(curves):
            points = [
                (r["step"], r[metric])
                for r in curves[setting]
                if metric in r and r[metric] is not None
            ]
            if points:
                ax.plot(*zip(*points), label=f"{setting_label}: {setting}")
        ax.set_xlabel("RL steps")
        ax.set_ylabel(metric.replace("_", " "))
        ax.legend()
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
