"""Ground-truth sequences with analytic motion."""

from __future__ import annotations

import numpy as np

from .bspline import Warp, prefilter

__all__ = ["band_limited_texture", "translation_fields", "rotation_fields", "make_synthetic", "degrade"]


def band_limited_texture(shape, seed: int = 0, cutoff: float = 0.15, low: float = 30.0,
                         high: float = 225.0) -> np.ndarray:
    """Gaussian low-passed white noise rescaled to [low, high].

    ``cutoff`` is the standard deviation of the spectral Gaussian in cycles
    per pixel.
    """
    rng = np.random.default_rng(seed)
    H, W = shape
    noise = rng.standard_normal((H, W))
    fy = np.fft.fftfreq(H)[:, None]
    fx = np.fft.fftfreq(W)[None, :]
    spectrum = np.fft.fft2(noise) * np.exp(-0.5 * (fx**2 + fy**2) / cutoff**2)
    tex = np.real(np.fft.ifft2(spectrum))
    tex = (tex - tex.min()) / (tex.max() - tex.min())
    return low + (high - low) * tex


def translation_fields(shape, T: int, vx: float, vy: float) -> np.ndarray:
    """Per-step motion ``d_t``; frame ``t-1`` samples frame ``t`` at ``(col + vx, row + vy)``."""
    d = np.zeros((T, 2) + tuple(shape))
    d[:, 0] = vx
    d[:, 1] = vy
    return d


def rotation_fields(shape, T: int, omega: float) -> np.ndarray:
    """Per-step motion of a rotation by ``omega`` radians per frame about the grid center."""
    H, W = shape
    rows, cols = np.mgrid[0:H, 0:W].astype(np.float64)
    cy, cx = (H - 1) / 2.0, (W - 1) / 2.0
    u, v = cols - cx, rows - cy
    cos, sin = np.cos(omega), np.sin(omega)
    field = np.stack([cos * u - sin * v - u, sin * u + cos * v - v])
    return np.repeat(field[None], T, axis=0)


def _cumulative_rotation(shape, k: int, omega: float) -> np.ndarray:
    return rotation_fields(shape, 1, k * omega)[0]


def make_synthetic(shape, T: int, motion: tuple, seed: int = 0, cutoff: float = 0.15):
    """HR frames (T+1, H, W) and per-step motion (T, 2, H, W).

    ``motion`` is ``("translate", vx, vy)`` or ``("rotate", omega)``.  The last
    frame is the texture itself; frame ``t`` samples it at the cumulative
    displacement of ``T - t`` steps, so consecutive frames are related by
    the returned per-step fields in the continuous domain.
    """
    shape = tuple(shape)
    base = band_limited_texture(shape, seed, cutoff)
    coeffs = prefilter(base)
    frames = np.empty((T + 1,) + shape)
    frames[T] = base
    kind = motion[0]
    if kind == "translate":
        vx, vy = float(motion[1]), float(motion[2])
        d = translation_fields(shape, T, vx, vy)
        for t in range(T):
            k = T - t
            frames[t] = Warp(translation_fields(shape, 1, k * vx, k * vy)[0])(coeffs)
    elif kind == "rotate":
        omega = float(motion[1])
        d = rotation_fields(shape, T, omega)
        for t in range(T):
            frames[t] = Warp(_cumulative_rotation(shape, T - t, omega))(coeffs)
    else:
        raise ValueError(f"unknown motion kind {kind!r}")
    return frames, d


def degrade(frames, sigma_noise: float = 0.0, seed: int = 0, op=None) -> np.ndarray:
    """Blur, decimate and add Gaussian noise of standard deviation ``sigma_noise``."""
    from .operators import ObservationOp

    op = op or ObservationOp()
    y = op(frames)
    if sigma_noise > 0:
        y = y + sigma_noise * np.random.default_rng(seed).standard_normal(y.shape)
    return y
