"""PNG figures for scan and propagation outputs (non-interactive Agg canvas)."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure


def _save(fig: Figure, path) -> Path:
    FigureCanvasAgg(fig)
    path = Path(path)
    fig.savefig(path, dpi=120, bbox_inches="tight")
    return path


def plot_gap_surface(path, x, y, gaps, level: int, labels=("u1", "u2"), marks: Sequence = ()) -> Path:
    """Log-scaled gap map with optional markers at located intersections."""
    fig = Figure(figsize=(5.5, 4.5))
    ax = fig.add_subplot()
    z = np.log10(np.maximum(np.asarray(gaps), 1e-16))
    mesh = ax.pcolormesh(x, y, z.T, shading="auto", cmap="viridis")
    fig.colorbar(mesh, ax=ax, label=f"log10 gap_{level}")
    for p in marks:
        ax.plot(p[0], p[1], "r+", markersize=10)
    ax.set_xlabel(labels[0])
    ax.set_ylabel(labels[1])
    ax.set_title(f"gap between levels {level} and {level + 1}")
    return _save(fig, path)


def plot_level_curves(path, x, eigenvalues, label: str = "u1", overlay: Sequence = ()) -> Path:
    """Eigenvalues along a line scan; ``overlay`` holds ``(x, y)`` pairs of reference curves."""
    fig = Figure(figsize=(6, 4.5))
    ax = fig.add_subplot()
    w = np.asarray(eigenvalues)
    ax.plot(x, w, color="k", linewidth=0.8)
    for ox, oy in overlay:
        ax.plot(ox, oy, color="tab:red", linestyle="--", linewidth=0.6)
    pad = 0.02 * (w.max() - w.min() or 1.0)
    ax.set_ylim(w.min() - pad, w.max() + pad)
    ax.set_xlabel(label)
    ax.set_ylabel("eigenvalue")
    return _save(fig, path)


def plot_populations(path, t, populations, names: Sequence[str]) -> Path:
    fig = Figure(figsize=(6, 4))
    ax = fig.add_subplot()
    pops = np.asarray(populations)
    for k, name in enumerate(names):
        ax.step(t, pops[:, k], where="post", label=name, linewidth=1)
    ax.set_xlabel("t")
    ax.set_ylabel("population")
    ax.set_ylim(-0.02, 1.02)
    ax.legend(loc="best", fontsize="small")
    return _save(fig, path)
