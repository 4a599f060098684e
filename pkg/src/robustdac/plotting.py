"""Figures written next to the CSV exports.

Uses the object-oriented Agg API, so importing this module never touches
pyplot state or needs a display.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib
import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from .harness import RunResult
from .signals import evaluate

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 9,
    "legend.fontsize": 7,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "lines.linewidth": 0.9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "savefig.dpi": 150,
}


def _figure(nrows: int = 1, ncols: int = 1, width: float = 6.4, height: float = 3.6):
    fig = Figure(figsize=(width, height), constrained_layout=True)
    FigureCanvasAgg(fig)
    axes = fig.subplots(nrows, ncols, squeeze=False)
    return fig, axes


def _averages(result: RunResult) -> np.ndarray:
    """Component average seen by each agent, ``(K, n, r)``."""
    return result.x - result.xtilde


def _channel_label(base: str, c: int, r: int) -> str:
    return base if r == 1 else f"{base}[{c + 1}]"


def plot_signals(result: RunResult, path: Path) -> Path:
    t = result.times
    r = result.scenario.r
    phi = np.stack([evaluate(s, t) for s in result.scenario.signals], axis=1)  # (K, n, r)
    avg = _averages(result)
    fig, axes = _figure(r, 1, height=3.0 * r)
    for c in range(r):
        ax = axes[c, 0]
        ax.plot(t, phi[:, :, c])
        for comp in result.components:
            ax.plot(t, avg[:, comp[0], c], "k:", linewidth=2.2)
        ax.set_xlabel("t [s]")
        ax.set_ylabel(_channel_label("phi(t)", c, r))
    axes[0, 0].set_title("Reference signals (dotted: component averages)")
    fig.savefig(path)
    return path


def plot_estimates(result: RunResult, path: Path) -> Path:
    t = result.times
    r = result.scenario.r
    avg = _averages(result)
    fig, axes = _figure(r, 1, height=3.0 * r)
    for c in range(r):
        ax = axes[c, 0]
        for i in range(result.scenario.n):
            ax.plot(t, result.x[:, i, c], label=f"x{i + 1}")
        for comp in result.components:
            ax.plot(t, avg[:, comp[0], c], "k:", linewidth=2.2)
        ax.set_xlabel("t [s]")
        ax.set_ylabel(_channel_label("x(t)", c, r))
    axes[0, 0].legend(ncol=5, loc="upper right")
    axes[0, 0].set_title(f"Network estimates ({result.mode})")
    fig.savefig(path)
    return path


def plot_errors(result: RunResult, path: Path) -> Path:
    """One panel per final connected component."""
    t = result.times
    comps = result.components or [list(range(result.scenario.n))]
    fig, axes = _figure(len(comps), 1, height=2.4 * len(comps))
    for ax, comp in zip(axes[:, 0], comps):
        for i in comp:
            ax.plot(t, result.xtilde[:, i, :], label=f"agent {i + 1}")
        ax.set_ylabel("consensus error")
        ax.legend(ncol=4, loc="upper right")
    axes[-1, 0].set_xlabel("t [s]")
    fig.savefig(path)
    return path


def plot_triggers(result: RunResult, path: Path) -> Path:
    """Broadcast raster and trigger variables (event mode only)."""
    fig, axes = _figure(2, 1, height=5.0)
    raster, etas = axes[0, 0], axes[1, 0]
    for i, times in enumerate(result.trigger_log or ()):
        raster.plot(times, np.full(len(times), i + 1), "|", markersize=4)
    raster.set_ylabel("agent")
    raster.set_title("Broadcast instants")
    if result.eta is not None and result.eta.size:
        etas.semilogy(result.times, np.clip(result.eta, 1e-300, None))
    etas.set_ylabel("eta")
    etas.set_xlabel("t [s]")
    fig.savefig(path)
    return path


def render_figures(result: RunResult, out_dir: str | Path) -> list[Path]:
    """Write the standard figure set; empty runs produce no figures."""
    out = Path(out_dir)
    if not result.times.size:
        return []
    out.mkdir(parents=True, exist_ok=True)
    with matplotlib.rc_context(STYLE):
        paths = [
            plot_signals(result, out / "signals.png"),
            plot_estimates(result, out / "estimates.png"),
            plot_errors(result, out / "errors.png"),
        ]
        if result.trigger_log is not None:
            paths.append(plot_triggers(result, out / "triggers.png"))
    return paths
