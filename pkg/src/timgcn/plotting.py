"""Figures written next to the CSV outputs (Agg backend, PNG)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.figsize": (6.0, 3.8),
    "figure.dpi": 110,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "font.size": 9,
    "legend.fontsize": 8,
    "legend.frameon": False,
}


def plot_history(history, path, title: str | None = None) -> None:
    epochs = [h["epoch"] for h in history]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.semilogy(epochs, [h["mean_loss"] for h in history], color="C0", label="train loss")
        ax.set_xlabel("epoch")
        ax.set_ylabel("mean training loss")
        ax2 = ax.twinx()
        ax2.step(epochs, [h["lr"] for h in history], where="post", color="C1", lw=1, label="learning rate")
        ax2.set_ylabel("learning rate")
        ax2.grid(False)
        lines = ax.get_lines() + ax2.get_lines()
        ax.legend(lines, [l.get_label() for l in lines], loc="upper right")
        if title:
            ax.set_title(title)
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)


def plot_horizon_errors(table, path, title: str | None = None) -> None:
    """Error against horizon, one line per table row."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for i, (name, vals) in enumerate(table.rows):
            ax.plot(table.horizons_ms, vals, marker="o", ms=3, color=f"C{i}", label=name)
        ax.set_xlabel("horizon [ms]")
        ax.set_ylabel("mean joint error")
        ax.set_ylim(bottom=0)
        ax.legend()
        if title:
            ax.set_title(title)
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)


def plot_grouped_bars(table, path, title: str | None = None) -> None:
    """Grouped bars: horizons on the x axis, one bar per row."""
    n = len(table.rows)
    x = np.arange(len(table.horizons_ms))
    width = 0.8 / max(n, 1)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for i, (name, vals) in enumerate(table.rows):
            ax.bar(x + (i - (n - 1) / 2) * width, vals, width, label=name, color=f"C{i}")
        ax.set_xticks(x, [f"{c} ms" for c in table.columns])
        ax.set_ylabel("mean joint error")
        ax.legend()
        if title:
            ax.set_title(title)
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
