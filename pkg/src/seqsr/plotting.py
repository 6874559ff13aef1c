"""Report figures written next to the tabular outputs (Agg backend, PNG)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = ["plot_trace", "plot_frames", "plot_motion"]

_META = {"Software": None}  # keeps the PNG bytes free of version strings


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=100, metadata=_META)
    plt.close(fig)
    return path


def plot_trace(trace, path) -> Path:
    """Cost, accepted curvature and (when known) motion error per outer iteration."""
    its = np.arange(1, len(trace.J) + 1)
    panels = 3 if trace.mepe else 2
    fig, axes = plt.subplots(1, panels, figsize=(4 * panels, 3.2))
    axes[0].plot(np.r_[0, its], np.r_[trace.J0, trace.J], marker="o", ms=3)
    axes[0].set_xlabel("outer iteration")
    axes[0].set_ylabel("J")
    axes[1].semilogy(its, trace.alpha, marker="o", ms=3)
    axes[1].set_xlabel("outer iteration")
    axes[1].set_ylabel("accepted alpha")
    if trace.mepe:
        axes[2].plot(its, trace.mepe, marker="o", ms=3)
        axes[2].set_xlabel("outer iteration")
        axes[2].set_ylabel("MEPE (px)")
    fig.tight_layout()
    return _save(fig, path)


def plot_frames(panels: dict, path, t: int = 0) -> Path:
    """Side-by-side grayscale frames, e.g. ``{"truth": x, "lanczos": xl, "estimate": xh}``."""
    fig, axes = plt.subplots(1, len(panels), figsize=(3 * len(panels), 3.2))
    axes = np.atleast_1d(axes)
    for ax, (name, seq) in zip(axes, panels.items()):
        frame = np.asarray(seq)[t]
        if frame.ndim == 3:
            frame = frame.mean(axis=0)
        ax.imshow(frame, cmap="gray", interpolation="nearest")
        ax.set_title(name)
        ax.set_axis_off()
    fig.tight_layout()
    return _save(fig, path)


def plot_motion(d, path, t: int = 0, step: int = 4) -> Path:
    """Quiver plot of motion field ``d[t]`` (components: horizontal, vertical)."""
    field = np.asarray(d)[t]
    H, W = field.shape[-2:]
    rows, cols = np.mgrid[0:H:step, 0:W:step]
    fig, ax = plt.subplots(figsize=(4, 4))
    ax.imshow(np.hypot(field[0], field[1]), cmap="viridis", interpolation="nearest")
    ax.quiver(cols, rows, field[0, ::step, ::step], field[1, ::step, ::step], color="w",
              angles="xy", scale_units="xy", scale=0.25)
    ax.set_title(f"motion t={t + 1}")
    ax.set_axis_off()
    fig.tight_layout()
    return _save(fig, path)
