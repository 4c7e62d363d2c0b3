"""Matplotlib figure export for reports (written next to the CSV outputs)."""

from __future__ import annotations

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from .errors import ParameterError


def _new_figure(width: float, height: float) -> Figure:
    fig = Figure(figsize=(width, height), dpi=110)
    FigureCanvasAgg(fig)
    return fig


def metric_curves_figure(path, rows: list[dict], title: str = "") -> None:
    """SSIM and NRMSE versus undersampling factor with std error bars.

    ``rows``: dicts with keys k, ssim_mean, ssim_std, nrmse_mean, nrmse_std
    and an optional ``label`` grouping curves.
    """
    if not rows:
        raise ParameterError("no rows to plot")
    fig = _new_figure(8.0, 3.4)
    ax_ssim, ax_nrmse = fig.subplots(1, 2)
    labels = sorted({r.get("label", "") for r in rows})
    for label in labels:
        sel = sorted((r for r in rows if r.get("label", "") == label), key=lambda r: r["k"])
        ks = [r["k"] for r in sel]
        ax_ssim.errorbar(ks, [r["ssim_mean"] for r in sel],
                         yerr=[r.get("ssim_std", 0.0) for r in sel],
                         marker="o", capsize=3, label=label or None)
        ax_nrmse.errorbar(ks, [r["nrmse_mean"] for r in sel],
                          yerr=[r.get("nrmse_std", 0.0) for r in sel],
                          marker="o", capsize=3, label=label or None)
    for ax, name in ((ax_ssim, "SSIM"), (ax_nrmse, "NRMSE")):
        ax.set_xlabel("kx undersampling")
        ax.set_ylabel(name)
        ax.grid(True, alpha=0.3)
        if any(labels):
            ax.legend(fontsize=8)
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path)


def pc_curve_figure(path, points: list[dict], title: str = "") -> None:
    """Percent correct versus undersampling factor, one curve per observer."""
    if not points:
        raise ParameterError("no points to plot")
    fig = _new_figure(4.6, 3.4)
    ax = fig.subplots()
    observers = sorted({p.get("observer", "") for p in points})
    for obs in observers:
        sel = sorted((p for p in points if p.get("observer", "") == obs),
                     key=lambda p: p["k"])
        ax.plot([p["k"] for p in sel], [p["percent_correct"] for p in sel],
                marker="o", label=obs or None)
    ax.axhline(50.0, color="gray", linestyle="--", linewidth=1, label="chance")
    ax.set_xlabel("kx undersampling")
    ax.set_ylabel("percent correct")
    ax.set_ylim(30, 105)
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path)


def comparison_grid_figure(path, panels: dict[str, tuple[np.ndarray, np.ndarray]],
                           marker: tuple[int, int] | None = None) -> None:
    """Side-by-side export: columns are conditions, top row without the
    signal, bottom row with it; labels are burned into the figure."""
    if not panels:
        raise ParameterError("no panels to export")
    conditions = list(panels)
    n = len(conditions)
    fig = _new_figure(2.2 * n, 4.6)
    axes = fig.subplots(2, n, squeeze=False)
    for col, cond in enumerate(conditions):
        without, with_signal = panels[cond]
        for row, img in ((0, without), (1, with_signal)):
            ax = axes[row][col]
            ax.imshow(np.asarray(img), cmap="gray", vmin=0.0, vmax=1.0)
            ax.set_xticks([])
            ax.set_yticks([])
            if row == 0:
                ax.set_title(cond, fontsize=9)
            if marker is not None and row == 1:
                ax.annotate("", xy=(marker[1], marker[0]),
                            xytext=(marker[1] + 14, marker[0] + 14),
                            arrowprops={"color": "white", "arrowstyle": "->"})
    axes[0][0].set_ylabel("background", fontsize=9)
    axes[1][0].set_ylabel("with signal", fontsize=9)
    fig.tight_layout()
    fig.savefig(path)


def loss_curves_figure(path, train_loss: list[float], val_loss: list[float] | None = None,
                       title: str = "") -> None:
    fig = _new_figure(4.6, 3.2)
    ax = fig.subplots()
    ax.plot(range(len(train_loss)), train_loss, label="train")
    if val_loss:
        ax.plot(range(len(val_loss)), val_loss, label="validation")
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path)
