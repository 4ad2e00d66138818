"""Figures written by ``voiclarify report`` (PNG, headless backend)."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .harness import CalibrationBin, SummaryRow, utility_curves  # noqa: E402

_STYLE = {
    "fixed_round": dict(marker="o", linestyle="-", label="fixed round (k)"),
    "confidence": dict(marker="s", linestyle="--", label="confidence (tau)"),
    "adaptive": dict(marker="^", linestyle="none", label="adaptive prompt"),
    "no_question": dict(marker="x", linestyle="none", label="no question", markersize=8),
    "voi": dict(marker="*", linestyle="none", label="VoI", markersize=16),
}


def utility_vs_turns(rows: Sequence[SummaryRow], task: str, cost: float, path) -> Path:
    curves = utility_curves(rows, task, cost)
    fig, ax = plt.subplots(figsize=(4.5, 3.4))
    for kind in ("fixed_round", "confidence", "adaptive", "no_question", "voi"):
        if kind in curves:
            xs, ys = zip(*curves[kind])
            ax.plot(xs, ys, **_STYLE[kind])
    ax.set_xlabel("mean questions asked")
    ax.set_ylabel("mean net utility")
    ax.set_title(f"{task}, c = {cost:g}")
    ax.grid(alpha=0.3)
    ax.legend(fontsize=7, frameon=False)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def reliability_diagram(bins: Sequence[CalibrationBin], title: str, path) -> Path:
    fig, ax = plt.subplots(figsize=(3.6, 3.4))
    ax.plot([0, 1], [0, 1], color="grey", linewidth=1, linestyle=":")
    filled = [b for b in bins if b.count]
    width = bins[0].hi - bins[0].lo if bins else 0.2
    ax.bar([b.lo for b in filled], [b.accuracy for b in filled], width=width, align="edge", edgecolor="black", alpha=0.7)
    for b in filled:
        ax.annotate(str(b.count), (b.lo + width / 2, b.accuracy), ha="center", va="bottom", fontsize=7)
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1.05)
    ax.set_xlabel("predicted probability (top belief)")
    ax.set_ylabel("accuracy of argmax")
    ax.set_title(title)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
