"""Matplotlib rendering of run/grid/ablation reports, saved next to the CSVs."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .orchestrator import RoundMetrics

_DPI = 130


def render_run(metrics: list[RoundMetrics], path: str) -> None:
    rounds = [rm.round_index for rm in metrics]
    fig, (ax_acc, ax_loss) = plt.subplots(1, 2, figsize=(9.5, 3.6))
    per_client = np.array([rm.accuracies for rm in metrics])
    for n in range(per_client.shape[1]):
        ax_acc.plot(rounds, per_client[:, n], color="steelblue", alpha=0.25, lw=0.8)
    ax_acc.plot(rounds, [rm.mean_accuracy for rm in metrics], color="firebrick", lw=2, label="mean")
    ax_acc.set_xlabel("round")
    ax_acc.set_ylabel("test accuracy")
    ax_acc.set_title("per-client and mean accuracy")
    ax_acc.legend(loc="lower right")

    gen = [(rm.round_index, rm.gen_loss) for rm in metrics if not np.isnan(rm.gen_loss)]
    if gen:
        ax_loss.plot(*zip(*gen), color="darkgreen", marker="o", ms=3)
        ax_loss.set_ylabel("generator loss")
    else:
        ax_loss.text(0.5, 0.5, "no generator in this protocol", ha="center", va="center")
    ax_loss.set_xlabel("round")
    ax_loss.set_title("prompt-generator loss")
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def render_grid(matrix: np.ndarray, taus1: list[float], taus2: list[float], path: str) -> None:
    fig, ax = plt.subplots(figsize=(4.8, 4.0))
    im = ax.imshow(matrix, cmap="viridis", origin="upper")
    ax.set_xticks(range(len(taus2)), [f"{t:g}" for t in taus2])
    ax.set_yticks(range(len(taus1)), [f"{t:g}" for t in taus1])
    ax.set_xlabel("tau2 (global)")
    ax.set_ylabel("tau1 (local)")
    for i in range(len(taus1)):
        for j in range(len(taus2)):
            ax.text(j, i, f"{matrix[i, j]:.3f}", ha="center", va="center",
                    color="white" if matrix[i, j] < matrix.max() - 0.05 else "black", fontsize=8)
    fig.colorbar(im, ax=ax, label="final mean accuracy")
    ax.set_title("temperature sensitivity")
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def render_ablation(series: dict[str, list[RoundMetrics]], path: str) -> None:
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    for kind, style in (("attention", "-o"), ("mlp", "--s")):
        if kind in series:
            ms = series[kind]
            ax.plot([rm.round_index for rm in ms], [rm.mean_accuracy for rm in ms], style, ms=3, label=kind)
    ax.set_xlabel("round")
    ax.set_ylabel("mean test accuracy")
    ax.set_title("generator ablation")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
