"""Matplotlib renderings of the main artifacts, written straight to files.

Every function saves a PNG next to the delimited outputs and closes its
figure, so batch runs never accumulate GUI state. The Agg backend is
forced at import time; nothing here ever opens a window.
"""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .coarsening import CoarseningHierarchy
from .graph import SparseGraph
from .training import ExperimentReport, LearningCurve

_DPI = 150


def _save(fig, path):
    fig.savefig(path, dpi=_DPI, bbox_inches="tight")
    plt.close(fig)
    return path


def plot_learning_curve(curve: LearningCurve, path):
    """Loss and accuracy traces over epochs, side by side."""
    fig, (ax_loss, ax_acc) = plt.subplots(1, 2, figsize=(10, 4))
    ax_loss.plot(curve.epoch, curve.train_loss, color="tab:blue")
    ax_loss.set_xlabel("epoch")
    ax_loss.set_ylabel("train loss")
    ax_loss.grid(True, alpha=0.3)
    ax_acc.plot(curve.epoch, curve.train_acc, label="train", color="tab:blue")
    if np.any(np.isfinite(curve.val_acc)):
        ax_acc.plot(curve.epoch, curve.val_acc, label="validation", color="tab:orange")
    ax_acc.set_xlabel("epoch")
    ax_acc.set_ylabel("accuracy")
    ax_acc.set_ylim(0.0, 1.05)
    ax_acc.legend(loc="lower right")
    ax_acc.grid(True, alpha=0.3)
    fig.tight_layout()
    return _save(fig, path)


def plot_adjacency(g: SparseGraph, path, title: str = "adjacency"):
    """Heatmap of the dense adjacency matrix."""
    fig, ax = plt.subplots(figsize=(5.5, 5))
    im = ax.imshow(g.adjacency(), cmap="viridis", interpolation="nearest")
    ax.set_title(f"{title} (n={g.n}, edges={g.n_edges})")
    ax.set_xlabel("node")
    ax.set_ylabel("node")
    fig.colorbar(im, ax=ax, fraction=0.046)
    return _save(fig, path)


def plot_hierarchy(h: CoarseningHierarchy, path):
    """One adjacency heatmap per level; fake padding rows stay empty."""
    n_panels = len(h.levels)
    fig, axes = plt.subplots(1, n_panels, figsize=(4 * n_panels, 4))
    if n_panels == 1:
        axes = [axes]
    for ax, g, level in zip(axes, h.levels, range(n_panels)):
        im = ax.imshow(g.adjacency(), cmap="viridis", interpolation="nearest")
        n_fake = sum(g.fake)
        ax.set_title(f"level {level}: n={g.n}, fake={n_fake}")
        fig.colorbar(im, ax=ax, fraction=0.046)
    fig.tight_layout()
    return _save(fig, path)


def plot_accuracy_per_run(report: ExperimentReport, path):
    """Per-run test accuracies grouped by repeat, with the overall mean."""
    fig, ax = plt.subplots(figsize=(8, 4))
    for rec in report.runs:
        ax.plot(rec.repeat + (rec.fold - (report.folds - 1) / 2) * 0.08,
                rec.accuracy, "o", color="tab:blue", alpha=0.6, markersize=5)
    mean = report.mean_accuracy
    ax.axhline(mean, color="tab:red", linestyle="--",
               label=f"mean = {mean:.3f}")
    ax.set_xlabel("repeat")
    ax.set_ylabel("test accuracy")
    ax.set_xticks(range(report.repeats))
    ax.set_ylim(0.0, 1.05)
    ax.legend(loc="lower right")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    return _save(fig, path)


def plot_confusion(conf: np.ndarray, class_names, path):
    """Annotated confusion-matrix heatmap (rows true, columns predicted)."""
    conf = np.asarray(conf)
    fig, ax = plt.subplots(figsize=(1.2 * len(class_names) + 3, 1.2 * len(class_names) + 2))
    im = ax.imshow(conf, cmap="Blues")
    threshold = conf.max() / 2 if conf.max() else 0.5
    for i in range(conf.shape[0]):
        for j in range(conf.shape[1]):
            ax.text(j, i, str(int(conf[i, j])), ha="center", va="center",
                    color="white" if conf[i, j] > threshold else "black")
    ax.set_xticks(range(len(class_names)), class_names)
    ax.set_yticks(range(len(class_names)), class_names)
    ax.set_xlabel("predicted")
    ax.set_ylabel("true")
    fig.colorbar(im, ax=ax, fraction=0.046)
    return _save(fig, path)


def plot_benchmark(rows, path):
    """Runtime against edge count for each method, log-log."""
    fig, ax = plt.subplots(figsize=(6, 4.5))
    methods = sorted({r.method for r in rows})
    for method in methods:
        pts = sorted((r.edges, r.seconds) for r in rows if r.method == method)
        ax.plot([p[0] for p in pts], [p[1] for p in pts], "o-", label=method)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("edges")
    ax.set_ylabel("seconds per filter application")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    return _save(fig, path)
