"""Matplotlib renderings of spectra fits and simulation-study results.

Figures are built on the Agg canvas directly so no display or global pyplot
state is involved.
"""

from __future__ import annotations

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

__all__ = ["plot_spectra", "plot_study_boxplots", "plot_mixed"]


def _save(fig, path):
    FigureCanvasAgg(fig)
    fig.savefig(path, dpi=120, bbox_inches="tight")


def plot_spectra(fit, path, title: str | None = None):
    """Scatter the spectra points, highlight those in the fit and draw the line."""
    pts = np.asarray(fit.points, dtype=float)
    used = np.asarray(fit.used_mask, dtype=bool)
    fig = Figure(figsize=(5, 4))
    ax = fig.add_subplot()
    ax.plot(pts[~used, 0], pts[~used, 1], "o", color="0.6", mfc="none", label="excluded")
    ax.plot(pts[used, 0], pts[used, 1], "o", color="C0", label="fitted")
    xs = np.array([pts[used, 0].min(), pts[used, 0].max()])
    ax.plot(xs, fit.intercept + fit.slope * xs, "-", color="C3",
            label=f"slope {fit.slope:.4f}")
    if fit.method == "dual":
        ax.set_xlabel("log2 energy (interval midpoint)")
        ax.set_ylabel("mean level")
    else:
        ax.set_xlabel("level offset")
        ax.set_ylabel("log2 mean energy")
    ax.set_title(title or f"{fit.method}: H = {fit.H_hat:.4f}")
    ax.legend(frameon=False, fontsize="small")
    _save(fig, path)


def plot_study_boxplots(result, path):
    """One boxplot panel per estimator: estimates against the true H grid."""
    names = result.estimator_names
    grid = list(result.config.H_grid)
    fig = Figure(figsize=(3.2 * len(names), 3.4))
    axes = fig.subplots(1, len(names), sharey=True, squeeze=False)[0]
    for ax, name in zip(axes, names):
        data = [
            [r["H_hat"] for r in result.records
             if r["estimator"] == name and r["H"] == H and r["error"] is None]
            for H in grid
        ]
        ax.boxplot(data, positions=grid, widths=0.06, manage_ticks=False)
        ax.plot(grid, grid, "--", color="C3", lw=0.8)
        ax.set_xticks(grid)
        ax.set_xticklabels([f"{h:g}" for h in grid], fontsize="small")
        ax.set_xlabel("true H")
        ax.set_title(name)
    axes[0].set_ylabel("estimate")
    _save(fig, path)


def plot_mixed(result, path):
    """Paired primal and dual estimates from the mixed-H experiment."""
    fig = Figure(figsize=(4, 4))
    ax = fig.add_subplot()
    ax.boxplot([result.primal, result.dual], tick_labels=["primal", "dual"])
    ax.set_ylabel("estimate")
    ax.set_title(f"paired t = {result.test.statistic:.2f}, p = {result.test.p_value:.2g}")
    _save(fig, path)
