"""Figure rendering for the CLI report paths (headless matplotlib)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .experiment import ExperimentReport
from .pretrain import EpochStats


def save_loss_curve(history: list[EpochStats], path: str, title: str = "") -> None:
    """Training-loss trajectory: the weighted components and their total."""
    epochs = [h.epoch for h in history]
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.plot(epochs, [h.total for h in history], label="total", linewidth=2)
    ax.plot(epochs, [h.l1 for h in history], label="top vs non-top", alpha=0.7)
    ax.plot(epochs, [h.l2 for h in history], label="finer bins", alpha=0.7)
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    ax.set_yscale("log")
    if title:
        ax.set_title(title)
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_metric_comparison(report: ExperimentReport, path: str) -> None:
    """Grouped bars with std error bars, one panel per metric, one bar per arm."""
    metrics = report.metric_names()
    n = len(metrics)
    cols = min(3, n)
    rows = (n + cols - 1) // cols
    fig, axes = plt.subplots(rows, cols, figsize=(4.2 * cols, 3.4 * rows), squeeze=False)
    arm_names = [arm.name for arm in report.arms]
    summaries = [arm.summary() for arm in report.arms]
    x = np.arange(len(arm_names))
    for i, metric in enumerate(metrics):
        ax = axes[i // cols][i % cols]
        means = [s[metric][0] for s in summaries]
        stds = [s[metric][1] for s in summaries]
        ax.bar(x, means, yerr=stds, capsize=4, color="tab:blue", alpha=0.8)
        ax.set_xticks(x)
        ax.set_xticklabels(arm_names, rotation=20, ha="right")
        ax.set_title(metric)
        ax.grid(True, axis="y", alpha=0.3)
    for j in range(n, rows * cols):
        axes[j // cols][j % cols].axis("off")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_fold_scatter(report: ExperimentReport, metric: str, path: str) -> None:
    """Per-fold values of one metric for every arm."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for arm in report.arms:
        values = [rep.as_row()[metric] for rep in arm.reports]
        ax.plot(range(len(values)), values, marker="o", label=arm.name)
    ax.set_xlabel("fold")
    ax.set_ylabel(metric)
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
