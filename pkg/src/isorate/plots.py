"""Matplotlib renderings of the standard report figures.

Every function writes a PNG next to the delimited output of the command
that produced the data, and returns the path it wrote. The Agg backend is
forced so rendering works headless.
"""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = [
    "plot_market",
    "plot_loading_link",
    "plot_posterior",
    "plot_grid",
    "plot_residual_comparison",
]

_DPI = 130


def plot_market(pure, commercial, path, title="Observed market"):
    """Commercial premium against pure premium, one dot per quote."""
    pure = np.asarray(pure, dtype=float)
    commercial = np.asarray(commercial, dtype=float)
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    ax.scatter(pure, commercial, s=14, alpha=0.7, edgecolor="none")
    ax.set_xlabel("pure premium")
    ax.set_ylabel("commercial premium")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path


def plot_loading_link(pure, observed, fit, path, title="Premium loading link"):
    """Observed premiums as dots, the fitted monotone step as a line."""
    pure = np.asarray(pure, dtype=float)
    observed = np.asarray(observed, dtype=float)
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    ax.scatter(pure, observed, s=14, alpha=0.7, edgecolor="none", label="observed")
    order = np.argsort(fit.x)
    ax.step(fit.x[order], fit.values[order], where="post", color="crimson", label="isotonic link")
    ax.set_xlabel("pure premium")
    ax.set_ylabel("commercial premium")
    ax.set_title(title)
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path


def plot_posterior(result, names, path, title="Posterior cloud"):
    """Weighted histograms of the final cloud plus the threshold trace."""
    final = result.final
    n_params = final.theta.shape[1]
    fig, axes = plt.subplots(1, n_params + 1, figsize=(3.4 * (n_params + 1), 3.2))
    axes = np.atleast_1d(axes)
    for k in range(n_params):
        ax = axes[k]
        ax.hist(final.theta[:, k], bins=30, weights=final.weights, color="#33658a")
        ax.set_xlabel(names[k])
        ax.set_ylabel("posterior mass" if k == 0 else "")
    ax = axes[-1]
    eps = [c.epsilon for c in result.clouds]
    gens = [c.generation for c in result.clouds]
    finite = [(g, e) for g, e in zip(gens, eps) if math.isfinite(e)]
    if finite:
        ax.plot([g for g, _ in finite], [e for _, e in finite], marker="o", color="#f26419")
    ax.set_xlabel("generation")
    ax.set_ylabel("threshold")
    fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path


def plot_grid(x_vals, y_vals, grid, x_name, y_name, path, title="Distance grid"):
    """Heatmap of a 2-d distance surface; the minimum cell is marked."""
    x_vals = np.asarray(x_vals, dtype=float)
    y_vals = np.asarray(y_vals, dtype=float)
    grid = np.asarray(grid, dtype=float)
    fig, ax = plt.subplots(figsize=(6.0, 4.6))
    mesh = ax.pcolormesh(x_vals, y_vals, grid.T, shading="nearest", cmap="viridis")
    fig.colorbar(mesh, ax=ax, label="distance")
    if np.any(np.isfinite(grid)):
        i, j = np.unravel_index(np.nanargmin(grid), grid.shape)
        ax.plot(x_vals[i], y_vals[j], "r*", markersize=12, label="minimum")
        ax.legend(frameon=False, loc="upper right")
    ax.set_xlabel(x_name)
    ax.set_ylabel(y_name)
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path


def plot_residual_comparison(rows, path, title="Monotone link vs straight line"):
    """Boxplots of per-seed median absolute residuals, one panel per preset."""
    kinds = sorted({r["kind"] for r in rows})
    fig, axes = plt.subplots(1, len(kinds), figsize=(4.4 * len(kinds), 3.6), squeeze=False)
    for ax, kind in zip(axes[0], kinds):
        iso = [r["median_abs_isotonic"] for r in rows if r["kind"] == kind]
        lin = [r["median_abs_linear"] for r in rows if r["kind"] == kind]
        ax.boxplot([iso, lin], tick_labels=["isotonic", "linear"])
        ax.set_title(f"{kind} loading")
        ax.set_ylabel("median |residual| per seed")
    fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path
