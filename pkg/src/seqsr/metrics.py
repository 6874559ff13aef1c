"""Image and motion figures of merit.

Worked substitutions:

* ``psnr([10, 10, 10, 10], [10, 10, 10, 8])`` = ``20 log10(4 * 10 / 2)`` = 26.0206 dB
  (the standard variant uses ``sqrt(n)`` and gives ``20 log10(2 * 10 / 2)`` = 20 dB);
* a motion error of +1 on one component everywhere gives ``mepe`` = 1;
* true motion (0, 0) against estimate (1, 0) at one pixel gives a Barron
  angle of ``arccos(1 / sqrt(2))`` = 45 degrees.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = ["psnr", "psnr_sequence", "cc", "mepe", "mbae", "crop"]


def _pair(a, b):
    a = np.asarray(getattr(a, "frames", getattr(a, "fields", a)), dtype=np.float64)
    b = np.asarray(getattr(b, "frames", getattr(b, "fields", b)), dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    return a, b


def psnr(x_true, x_hat, standard: bool = False) -> float:
    """``20 log10(n ||x_true||_inf / ||x_true - x_hat||_2)``; ``standard`` uses ``sqrt(n)``.

    Identical inputs give ``inf``.
    """
    a, b = _pair(x_true, x_hat)
    err = float(np.linalg.norm((a - b).ravel()))
    if err == 0.0:
        return math.inf
    n = a.size
    scale = math.sqrt(n) if standard else n
    return 20.0 * math.log10(scale * float(np.abs(a).max()) / err)


def psnr_sequence(x_true, x_hat, standard: bool = False) -> np.ndarray:
    """Per-frame PSNR of two sequences (leading axis is time)."""
    a, b = _pair(x_true, x_hat)
    return np.array([psnr(a[t], b[t], standard) for t in range(a.shape[0])])


def cc(x_true, x_hat) -> float:
    """Centered correlation coefficient; ``nan`` when either input is constant."""
    a, b = _pair(x_true, x_hat)
    a = a.ravel() - a.mean()
    b = b.ravel() - b.mean()
    den = float(np.linalg.norm(a) * np.linalg.norm(b))
    if den == 0.0:
        return math.nan
    return float(np.clip(np.dot(a, b) / den, -1.0, 1.0))


def mepe(d_true, d_hat) -> float:
    """``1/(nT) sum_t ||d_true_t - d_hat_t||_1`` for motion arrays of shape (T, 2, H, W)."""
    a, b = _pair(d_true, d_hat)
    if a.ndim != 4 or a.shape[1] != 2:
        raise ValueError("motion sequences must have shape (T, 2, H, W)")
    T, n = a.shape[0], a.shape[2] * a.shape[3]
    return float(np.abs(a - b).sum() / (n * T))


def mbae(d_true, d_hat) -> float:
    """Mean Barron angular error in degrees."""
    a, b = _pair(d_true, d_hat)
    if a.ndim != 4 or a.shape[1] != 2:
        raise ValueError("motion sequences must have shape (T, 2, H, W)")
    num = 1.0 + a[:, 0] * b[:, 0] + a[:, 1] * b[:, 1]
    den = np.sqrt((1.0 + b[:, 0] ** 2 + b[:, 1] ** 2) * (1.0 + a[:, 0] ** 2 + a[:, 1] ** 2))
    ang = np.arccos(np.clip(num / den, -1.0, 1.0))
    return float(np.degrees(ang.mean()))


def crop(a, width: int, height: int) -> np.ndarray:
    """Central ``width x height`` window over the last two axes."""
    a = np.asarray(a)
    H, W = a.shape[-2:]
    if width > W or height > H or width < 1 or height < 1:
        raise ValueError(f"crop {width}x{height} does not fit a {W}x{H} grid")
    r0 = (H - height) // 2
    c0 = (W - width) // 2
    return a[..., r0:r0 + height, c0:c0 + width]
