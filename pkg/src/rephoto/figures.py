"""Matplotlib figure rendering for evaluation reports."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def _bxp_dict(label: str, stats: dict) -> dict:
    return {
        "label": label,
        "whislo": stats["min"],
        "q1": stats["q1"],
        "med": stats["median"],
        "q3": stats["q3"],
        "whishi": stats["max"],
        "fliers": [],
    }


def render_report_figure(report: dict, path) -> None:
    """Draw per-metric boxplots of the per-fold aggregates next to the report."""
    box = report["boxplot"]
    metric_stats = [(m, s) for m, s in box.items() if m != "completeness" and s is not None]

    n_axes = 1 + (1 if metric_stats else 0)
    fig, axes = plt.subplots(1, n_axes, figsize=(4 * n_axes, 4), squeeze=False)
    ax = axes[0][0]
    ax.bxp([_bxp_dict("completeness", box["completeness"])], showfliers=False)
    ax.set_ylabel("completeness")
    ax.set_ylim(0.0, 1.05)
    ax.set_title(f"completeness over {report['config']['n_folds']} fold(s)")
    if metric_stats:
        ax = axes[0][1]
        ax.bxp([_bxp_dict(m, s) for m, s in metric_stats], showfliers=False)
        ax.set_ylabel("mean error")
        ax.set_title("per-fold error aggregates")
    fig.tight_layout()
    fig.savefig(Path(path), dpi=110)
    plt.close(fig)


def render_boxplot_figure(stats: dict, path, label: str = "values") -> None:
    """Draw a single precomputed five-number boxplot."""
    fig, ax = plt.subplots(figsize=(3.5, 4))
    ax.bxp([_bxp_dict(label, stats)], showfliers=False)
    fig.tight_layout()
    fig.savefig(Path(path), dpi=110)
    plt.close(fig)
