"""Figure rendering. Every function writes one PNG next to the delimited
output and returns the path it wrote.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .diagnostics import ResidualSeries, base_grid, kernel_grid, qq_points
from .events import EventStream
from .intensity import HawkesModel
from .network import ReluNet, net_forward

__all__ = [
    "plot_fit_trace",
    "plot_qq",
    "plot_kernels",
    "plot_bases",
    "plot_nhpp_rate",
    "plot_events",
]


def plot_fit_trace(trace, path) -> str:
    fig, ax = plt.subplots(figsize=(6, 4))
    it = np.asarray(trace.iterations)
    ax.plot(it, trace.train_nll, label="train (batch estimate)", alpha=0.7)
    ax.plot(it, trace.val_nll, label="validation", lw=2)
    if trace.best_iteration is not None:
        ax.axvline(trace.best_iteration, color="gray", ls=":", lw=1,
                   label=f"best @ {trace.best_iteration}")
    ax.set_xlabel("iteration")
    ax.set_ylabel("negative log-likelihood")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return str(path)


def plot_qq(res: ResidualSeries, path, slope: float | None = None) -> str:
    theo, emp = qq_points(res)
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.plot(theo, emp, ".", ms=3, alpha=0.6)
    top = float(max(theo[-1], emp[-1])) if theo.size else 1.0
    ax.plot([0.0, top], [0.0, top], "k--", lw=1, label="ideal")
    title = "residual QQ vs Exp(1)"
    if slope is not None:
        title += f" (slope {slope:.3f})"
    ax.set_title(title)
    ax.set_xlabel("theoretical quantile")
    ax.set_ylabel("empirical quantile")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return str(path)


def plot_kernels(model: HawkesModel, path, factor: float = 1.0,
                 lag_max: float | None = None, truth=None,
                 n_grid: int = 400) -> str:
    """Kernel grid on the original time axis.

    The model lives on the scaled axis; with scale factor f the original-axis
    kernel is f * net(f * lag). `truth`, when given, is a GroundTruthModel on
    the original axis drawn dashed for comparison.
    """
    D = model.D
    if lag_max is None:
        lag_max = model.max_lag / factor
    lags = np.linspace(0.0, lag_max, n_grid)[1:]  # kernels act on positive lag
    vals = kernel_grid(model, factor * lags) * factor
    fig, axes = plt.subplots(D, D, figsize=(4 * D, 3 * D), squeeze=False)
    for d in range(D):
        for j in range(D):
            ax = axes[d][j]
            ax.plot(lags, vals[d, j], label="fitted")
            if truth is not None:
                ax.plot(lags, truth.kernels[d][j].value(lags), "k--",
                        lw=1, label="true")
            ax.axhline(0.0, color="gray", lw=0.5)
            ax.set_title(f"kernel {d},{j}")
            if d == 0 and j == 0:
                ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return str(path)


def plot_bases(model: HawkesModel, path, t_end: float, factor: float = 1.0,
               truth=None, n_grid: int = 400) -> str:
    """Base rates over the window on the original axis."""
    times = np.linspace(0.0, t_end, n_grid)
    vals = base_grid(model, factor * times) * factor
    fig, ax = plt.subplots(figsize=(6, 4))
    for d in range(model.D):
        ax.plot(times, vals[d], label=f"dim {d}")
        if truth is not None:
            ax.plot(times, truth.bases[d].value(times), "k--", lw=1)
    ax.set_xlabel("time")
    ax.set_ylabel("base rate")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return str(path)


def plot_nhpp_rate(net: ReluNet, path, t_end: float, factor: float = 1.0,
                   truth=None, n_grid: int = 400) -> str:
    """Fitted flexible Poisson rate on the original axis."""
    times = np.linspace(0.0, t_end, n_grid)
    vals = np.maximum(net_forward(net, factor * times), 0.0) * factor
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(times, vals, label="fitted")
    if truth is not None:
        ax.plot(times, truth.value(times), "k--", lw=1, label="true")
    ax.set_xlabel("time")
    ax.set_ylabel("rate")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return str(path)


def plot_events(stream: EventStream, path, max_points: int = 20000) -> str:
    """Per-dimension counting processes over the window."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for d in range(stream.D):
        td = stream.window_dim_times(d)
        if td.size > max_points:
            idx = np.linspace(0, td.size - 1, max_points).astype(int)
            td = td[idx]
            counts = idx + 1.0
        else:
            counts = np.arange(1, td.size + 1, dtype=float)
        ax.step(td, counts, where="post", label=f"dim {d} ({stream.dim_times(d).size})")
    ax.set_xlabel("time")
    ax.set_ylabel("cumulative count")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return str(path)
