"""Static figures written next to the CSV output."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def _save(fig, path) -> Path:
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_tradeoff(rows, path):
    """Side against central distortion, one marker per b."""
    fig, ax = plt.subplots(figsize=(5, 4))
    ds = [r[2] for r in rows]
    dc = [r[4] for r in rows]
    ax.errorbar(dc, ds, xerr=[r[5] for r in rows], yerr=[r[3] for r in rows], fmt="o-", capsize=3)
    for r in rows:
        ax.annotate(f"b={r[0]}", (r[4], r[2]), textcoords="offset points", xytext=(4, 4), fontsize=8)
    ax.set_xlabel("central distortion")
    ax.set_ylabel("side distortion")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.grid(True, which="both", alpha=0.3)
    return _save(fig, path)


def plot_curves(x, curves: dict, path, xlabel="loss probability p", ylabel="average distortion", log=True):
    fig, ax = plt.subplots(figsize=(5, 4))
    for label, y in curves.items():
        ax.plot(x, y, "o-", label=label)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if log:
        ax.set_yscale("log")
    ax.grid(True, alpha=0.3)
    ax.legend()
    return _save(fig, path)


def plot_gilbert(rows, path):
    fig, ax = plt.subplots(figsize=(6, 4))
    labels = [f"p={r[0]:g}\nq={r[1]:g}" for r in rows]
    x = range(len(rows))
    width = 0.38
    ax.bar([i - width / 2 for i in x], [r[2] for r in rows], width, label="segmentation")
    ax.bar([i + width / 2 for i in x], [r[3] for r in rows], width, label="CS-GQ")
    ax.set_xticks(list(x))
    ax.set_xticklabels(labels, fontsize=8)
    ax.set_ylabel("average distortion")
    ax.legend()
    return _save(fig, path)


def plot_result(experiment: str, rows, path):
    """Figure for one experiment's rows, or None when there is nothing to draw."""
    if experiment == "tradeoff":
        return plot_tradeoff(rows, path)
    if experiment == "opt-distortion":
        return plot_curves([r[0] for r in rows], {"oracle rule": [r[2] for r in rows],
                                                  "operational rule": [r[4] for r in rows]}, path)
    if experiment == "memoryless":
        return plot_curves([r[0] for r in rows], {"CS-GQ": [r[1] for r in rows],
                                                  "segmentation": [r[2] for r in rows]}, path)
    if experiment == "gilbert":
        return plot_gilbert(rows, path)
    return None
