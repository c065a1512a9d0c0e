"""Matplotlib renderings of the experiment artifacts.

Every CLI command that writes a delimited report also drops a PNG next to it
so results can be eyeballed without loading the CSVs.  All rendering uses
the Agg backend; nothing here opens a window.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _finish(fig, path: str) -> None:
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def training_curves(history, path: str) -> None:
    """Loss traces per iteration plus the per-epoch training AUC."""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.2))
    steps = np.arange(1, len(history.gen_loss) + 1)
    ax1.plot(steps, history.gen_loss, label="generator", color="tab:red", lw=1)
    ax1.plot(steps, history.disc_loss, label="discriminators (mean)", color="tab:blue", lw=1)
    ax1.set_xlabel("iteration")
    ax1.set_ylabel("loss")
    ax1.legend(fontsize=8)
    epochs = np.arange(1, len(history.train_auc) + 1)
    ax2.plot(epochs, history.train_auc, color="tab:red", label="train AUC")
    ax2.plot(epochs, history.train_gmean, color="tab:blue", label="train Gmean")
    ax2.axvline(history.best_epoch, color="gray", ls="--", lw=1, label="best epoch")
    ax2.set_xlabel("epoch")
    ax2.set_ylim(0, 1.02)
    ax2.legend(fontsize=8)
    _finish(fig, path)


def sweep_curve(values, aucs, gmeans, xlabel: str, path: str) -> None:
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.plot(values, aucs, "o-", color="tab:red", label="AUC")
    ax.plot(values, gmeans, "s-", color="tab:blue", label="Gmean")
    ax.set_xlabel(xlabel)
    ax.set_ylabel("mean over runs")
    ax.legend(fontsize=8)
    _finish(fig, path)


def ablation_bars(names, aucs, gmeans, path: str) -> None:
    fig, ax = plt.subplots(figsize=(6, 3.2))
    x = np.arange(len(names))
    ax.bar(x - 0.2, aucs, width=0.4, color="tab:red", label="AUC")
    ax.bar(x + 0.2, gmeans, width=0.4, color="tab:blue", label="Gmean")
    ax.set_xticks(x)
    ax.set_xticklabels(names, rotation=20, ha="right", fontsize=8)
    ax.set_ylim(0, 1.05)
    ax.legend(fontsize=8)
    _finish(fig, path)


def boundary_heatmap(grid: np.ndarray, path: str, X=None, y=None) -> None:
    """Score field over a 2-D box, optionally overlaying labeled points."""
    xs = np.unique(grid[:, 0])
    ys = np.unique(grid[:, 1])
    field = grid[:, 2].reshape(len(xs), len(ys))
    fig, ax = plt.subplots(figsize=(4.6, 4))
    im = ax.pcolormesh(xs, ys, field.T, cmap="RdBu_r", vmin=0, vmax=1, shading="auto")
    ax.contour(xs, ys, field.T, levels=[0.5], colors="k", linewidths=1, linestyles="--")
    fig.colorbar(im, ax=ax, label="anomaly score")
    if X is not None and y is not None:
        X = np.asarray(X)
        y = np.asarray(y)
        ax.scatter(X[y == 0, 0], X[y == 0, 1], s=6, facecolors="none",
                   edgecolors="white", linewidths=0.4, label="normal")
        ax.scatter(X[y == 1, 0], X[y == 1, 1], s=14, c="black", marker="x",
                   linewidths=0.8, label="anomaly")
        ax.legend(fontsize=7, loc="upper right")
    _finish(fig, path)


def dataset_scatter(X: np.ndarray, y: np.ndarray, path: str) -> None:
    fig, ax = plt.subplots(figsize=(4.2, 4))
    ax.scatter(X[y == 0, 0], X[y == 0, 1], s=6, c="tab:blue", label="normal")
    ax.scatter(X[y == 1, 0], X[y == 1, 1], s=14, c="tab:red", marker="x", label="anomaly")
    ax.legend(fontsize=8)
    _finish(fig, path)


def cd_diagram(names, average_ranks, cd: float, path: str) -> None:
    """Ranks on a number line with the critical-difference bar."""
    order = np.argsort(average_ranks)
    names = [names[i] for i in order]
    ranks = np.asarray(average_ranks)[order]
    k = len(names)
    fig, ax = plt.subplots(figsize=(7, 0.45 * k + 1.6))
    ax.set_xlim(0.5, k + 0.5)
    ax.set_ylim(-k - 1, 2.4)
    ax.spines[["left", "right", "bottom"]].set_visible(False)
    ax.get_yaxis().set_visible(False)
    ax.xaxis.tick_top()
    ax.set_xlabel("average rank (1 = best)")
    ax.xaxis.set_label_position("top")
    for i, (name, r) in enumerate(zip(names, ranks)):
        ax.plot([r, r], [0, -i - 1], color="k", lw=0.8)
        ax.text(r, -i - 1.05, f" {name} ({r:.2f})", va="top", fontsize=8)
    ax.plot([ranks[0], ranks[0] + cd], [1.4, 1.4], color="tab:red", lw=2.5)
    ax.text(ranks[0] + cd / 2, 1.6, f"CD = {cd:.2f}", ha="center", fontsize=8,
            color="tab:red")
    _finish(fig, path)
