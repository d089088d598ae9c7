"""Report figures. Always rendered off-screen to image files."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = ["plot_confusion", "plot_context_curves", "plot_loss"]


def plot_confusion(confusion: np.ndarray, labels: Sequence[str], path: str | Path, title: str = "") -> Path:
    C = np.asarray(confusion)
    fig, ax = plt.subplots(figsize=(4, 3.5))
    ax.imshow(C, cmap="Blues")
    ax.set_xticks(range(len(labels)), labels)
    ax.set_yticks(range(len(labels)), labels)
    ax.set_xlabel("predicted")
    ax.set_ylabel("gold")
    hi = C.max() if C.size else 0
    for i in range(C.shape[0]):
        for j in range(C.shape[1]):
            ax.text(j, i, str(int(C[i, j])), ha="center", va="center", color="white" if C[i, j] > hi / 2 else "black")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def plot_context_curves(summary: Sequence[dict], path: str | Path, test_set: str = "generated") -> Path:
    """Micro-F1 (mean with std error bars) against context level, one line per pooling/portion."""
    fig, ax = plt.subplots(figsize=(5.5, 4))
    lines: dict[tuple[str, str], list[dict]] = {}
    for r in summary:
        if r["test_set"] == test_set:
            lines.setdefault((r["pooling"], r["portion"]), []).append(r)
    for (pooling, portion), rs in sorted(lines.items()):
        rs = sorted(rs, key=lambda r: r["k"])
        ax.errorbar([r["k"] for r in rs], [100 * r["micro_f1"] for r in rs], yerr=[100 * r["micro_f1_std"] for r in rs],
                    marker="o", capsize=3, label=f"{pooling} {portion}")
    ax.set_xlabel("context level K")
    ax.set_ylabel("micro F1")
    ax.set_xticks(sorted({r["k"] for r in summary}))
    ax.legend(fontsize=7)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def plot_loss(trace: Sequence[float], path: str | Path, title: str = "") -> Path:
    fig, ax = plt.subplots(figsize=(4.5, 3))
    ax.plot(range(1, len(trace) + 1), trace)
    ax.set_xlabel("epoch")
    ax.set_ylabel("objective")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)
