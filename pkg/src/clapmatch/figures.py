"""Render benchmark summaries and match visualizations to image files."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .graph_model import GraphSide, HardAssignment
from .synthetic_bench import BenchReport


def save_benchmark_figures(report: BenchReport, outdir) -> list[Path]:
    """Write an accuracy chart and a timing chart next to the report files.

    Returns the list of written paths; an empty report writes nothing.
    """
    aggregates = report.aggregates()
    if not aggregates:
        return []
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    labels = [f"{a.solver}\n{a.attribute}" for a in aggregates]
    x = np.arange(len(aggregates))
    written = []

    fig, ax = plt.subplots(figsize=(1.6 + 1.2 * len(aggregates), 3.6))
    acc = [a.mean_acc_pct for a in aggregates]
    ax.bar(x, acc, color="#3b7ea1")
    for xi, v in zip(x, acc):
        ax.text(xi, v, f"{v:.1f}", ha="center", va="bottom", fontsize=8)
    ax.set_xticks(x, labels)
    ax.set_ylim(0, 105)
    ax.set_ylabel("mean accuracy (%)")
    ax.set_title(f"matching accuracy ({report.descriptor_model})", fontsize=9)
    fig.tight_layout()
    path = outdir / "accuracy.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    written.append(path)

    fig, ax = plt.subplots(figsize=(1.6 + 1.2 * len(aggregates), 3.6))
    times = [a.mean_time_ms for a in aggregates]
    ax.bar(x, times, color="#a15b3b")
    for xi, v, a in zip(x, times, aggregates):
        ax.text(xi, v, f"{v:.1f}ms\n{a.fps:.0f}fps", ha="center", va="bottom", fontsize=8)
    ax.set_xticks(x, labels)
    ax.set_ylabel(f"mean solve time (ms, {report.timing_scope})")
    ax.set_title("matching speed", fontsize=9)
    fig.tight_layout()
    path = outdir / "timing.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    written.append(path)
    return written


def save_match_figure(a: GraphSide, b: GraphSide, hard: HardAssignment,
                      truth: HardAssignment | None, path) -> Path:
    """Draw both point sets side by side with one line per matched pair.

    With ground truth available, correct matches are green and wrong ones
    red; without it all match lines are blue.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    span_a = np.ptp(a.points, axis=0).max() if a.size > 1 else 1.0
    offset = np.array([a.points[:, 0].max() - b.points[:, 0].min()
                       + 0.6 * max(span_a, 1.0), 0.0])
    b_pts = b.points + offset

    fig, ax = plt.subplots(figsize=(7, 4))
    ax.scatter(a.points[:, 0], a.points[:, 1], c="k", s=25, zorder=3)
    ax.scatter(b_pts[:, 0], b_pts[:, 1], c="k", s=25, zorder=3, marker="s")
    for i, j in hard.pairs:
        if truth is None:
            color = "#3b7ea1"
        else:
            color = "green" if truth.values[i, j] == 1.0 else "red"
        ax.plot([a.points[i, 0], b_pts[j, 0]], [a.points[i, 1], b_pts[j, 1]],
                color=color, lw=1.2, zorder=2)
    ax.set_aspect("equal")
    ax.set_axis_off()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
