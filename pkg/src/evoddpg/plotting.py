"""Figure helpers for the comparison and training-progress reports.

Figures are rendered off-screen and saved next to the CSV they visualise.
"""
from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

GOLDEN = (math.sqrt(5) - 1.0) / 2.0
RC = {
    "axes.labelsize": 9,
    "axes.titlesize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "figure.dpi": 120,
}


def new_figure(width=5.0, ncols=1, nrows=1, height=None):
    height = height or width * GOLDEN * nrows / max(ncols, 1) * (1.4 if ncols > 1 else 1.0)
    with plt.rc_context(RC):
        fig, axes = plt.subplots(nrows, ncols, figsize=(width, height), squeeze=False)
    return fig, axes


def save(fig, path):
    with plt.rc_context(RC):
        fig.tight_layout()
        fig.savefig(path)
    plt.close(fig)
    return path


def reward_vs_episodes(series, path):
    """``series``: {method: (episodes, median_reward)}."""
    fig, axes = new_figure()
    ax = axes[0][0]
    for method, (episodes, reward) in series.items():
        ax.plot(episodes, reward, marker="o", markersize=3, label=method)
    ax.set_xlabel("episodes")
    ax.set_ylabel("median total reward (greedy eval)")
    ax.legend(frameon=False)
    return save(fig, path)


def ga_progress(series, path):
    """``series``: {run: dict of columns eval_index, epochs, best_epochs, success, reward}."""
    fig, axes = new_figure(width=10.0, ncols=3)
    panels = (("epochs", "epochs to goal"), ("success", "median success rate"),
              ("reward", "median reward"))
    for ax, (col, label) in zip(axes[0], panels):
        for run, cols in series.items():
            ax.plot(cols["eval_index"], cols[col], ".", alpha=0.6, label=run)
            if col == "epochs":
                ax.step(cols["eval_index"], cols["best_epochs"], where="post",
                        label=f"{run} best so far")
        ax.set_xlabel("fitness evaluations")
        ax.set_ylabel(label)
    axes[0][0].legend(frameon=False)
    return save(fig, path)


def comparison_bars(report, path):
    """Four panels, one per efficiency metric, one bar per method."""
    metrics = (("episodes", "episodes"), ("steps", "steps"), ("epochs", "epochs"),
               ("time_s", "wall time (s)"))
    fig, axes = new_figure(width=10.0, ncols=4)
    labels = list(report["arms"])
    for ax, (key, title) in zip(axes[0], metrics):
        values = [report["arms"][m][f"{key}_penalized"] for m in labels]
        bars = ax.bar(range(len(labels)), values, color=["0.6", "C0", "C1", "C2"][:len(labels)])
        best = report["best"].get(key)
        for label, bar in zip(labels, bars):
            if label == best:
                bar.set_edgecolor("k")
                bar.set_linewidth(1.5)
        ax.set_xticks(range(len(labels)))
        ax.set_xticklabels(labels, rotation=15)
        ax.set_title(title)
    fig.suptitle(f"{report['env']}: mean over {len(report['seeds'])} seeds", fontsize=9)
    return save(fig, path)
