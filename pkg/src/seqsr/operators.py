"""Fixed linear operators: blur + decimation, motion finite differences, wavelets.

All operators act on the trailing (H, W) axes and use periodic boundaries.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import ndimage

__all__ = [
    "gaussian_kernel",
    "burt_kernel",
    "kernel_taps",
    "ObservationOp",
    "observe",
    "observe_adjoint",
    "motion_grad",
    "motion_grad_adjoint",
    "group_norms",
    "WaveletOp",
    "default_levels",
    "wavelet_analysis",
    "wavelet_synthesis",
    "HAAR",
    "DB4",
]


def gaussian_kernel(sigma: float = 1.12, radius: int = 4) -> np.ndarray:
    """Truncated, normalized sampled Gaussian."""
    k = np.arange(-radius, radius + 1, dtype=np.float64)
    taps = np.exp(-0.5 * (k / sigma) ** 2)
    return taps / taps.sum()


def burt_kernel(a: float = 0.4) -> np.ndarray:
    """Five-tap generating kernel of the Burt-Adelson pyramid."""
    return np.array([0.25 - a / 2, 0.25, a, 0.25, 0.25 - a / 2])


def kernel_taps(name: str = "gaussian", sigma: float = 1.12) -> np.ndarray:
    if name == "gaussian":
        return gaussian_kernel(sigma)
    if name == "burt5":
        return burt_kernel()
    raise ValueError(f"unknown kernel {name!r}")


def _circular_filter(x: np.ndarray, taps: np.ndarray) -> np.ndarray:
    """Separable periodic filtering with a symmetric odd-length kernel."""
    out = ndimage.convolve1d(x, taps, axis=-1, mode="wrap")
    return ndimage.convolve1d(out, taps, axis=-2, mode="wrap")


class ObservationOp:
    """Low-pass filtering followed by keeping every second row and column."""

    def __init__(self, taps=None):
        taps = gaussian_kernel() if taps is None else np.asarray(taps, dtype=np.float64)
        if taps.ndim != 1 or len(taps) % 2 == 0:
            raise ValueError("kernel must be a 1-D odd-length array")
        if not np.allclose(taps, taps[::-1]):
            raise ValueError("kernel must be symmetric")
        if abs(taps.sum() - 1.0) > 1e-12:
            raise ValueError("kernel taps must sum to 1")
        self.taps = taps

    @classmethod
    def from_config(cls, cfg) -> "ObservationOp":
        return cls(kernel_taps(cfg.kernel, cfg.sigma))

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        H, W = x.shape[-2:]
        if H % 2 or W % 2:
            raise ValueError(f"high-resolution grid must have even dimensions, got {H}x{W}")
        return np.ascontiguousarray(_circular_filter(x, self.taps)[..., ::2, ::2])

    def adjoint(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=np.float64)
        h, w = r.shape[-2:]
        up = np.zeros(r.shape[:-2] + (2 * h, 2 * w))
        up[..., ::2, ::2] = r
        return _circular_filter(up, self.taps)


def observe(x, taps=None) -> np.ndarray:
    return ObservationOp(taps)(x)


def observe_adjoint(r, taps=None) -> np.ndarray:
    return ObservationOp(taps).adjoint(r)


def motion_grad(d) -> np.ndarray:
    """Forward differences of both motion components.

    ``d`` has shape (..., 2, H, W); the result has shape (..., H, W, 4) with
    the group of pixel i laid out as
    ``[dx d_h, dy d_h, dx d_v, dy d_v]``.
    """
    d = np.asarray(d, dtype=np.float64)
    out = []
    for comp in (0, 1):
        a = d[..., comp, :, :]
        out.append(np.roll(a, -1, axis=-1) - a)
        out.append(np.roll(a, -1, axis=-2) - a)
    return np.stack(out, axis=-1)


def motion_grad_adjoint(v) -> np.ndarray:
    """Transpose of :func:`motion_grad`; ``G G*`` is the negative 5-point Laplacian."""
    v = np.asarray(v, dtype=np.float64)
    comps = []
    for comp in (0, 1):
        gx = v[..., 2 * comp]
        gy = v[..., 2 * comp + 1]
        comps.append(np.roll(gx, 1, axis=-1) - gx + np.roll(gy, 1, axis=-2) - gy)
    return np.stack(comps, axis=-3)


def group_norms(v) -> np.ndarray:
    """Euclidean norm of every 4-element group of an analysis vector."""
    v = np.asarray(v, dtype=np.float64)
    return np.sqrt(np.sum(v * v, axis=-1))


HAAR = np.array([1.0, 1.0]) / np.sqrt(2.0)
DB4 = np.array([
    0.2303778133088965,
    0.7148465705529157,
    0.6308807679298589,
    -0.027983769416859858,
    -0.18703481171909309,
    0.030841381835560764,
    0.0328830116668852,
    -0.010597401785069032,
])


def _highpass(h: np.ndarray) -> np.ndarray:
    L = len(h)
    return np.array([(-1) ** k * h[L - 1 - k] for k in range(L)])


def _analysis_1d(x: np.ndarray, h: np.ndarray, g: np.ndarray) -> np.ndarray:
    N = x.shape[-1]
    base = 2 * np.arange(N // 2)
    lo = np.zeros(x.shape[:-1] + (N // 2,))
    hi = np.zeros_like(lo)
    for k in range(len(h)):
        xs = x[..., (base + k) % N]
        lo += h[k] * xs
        hi += g[k] * xs
    return np.concatenate([lo, hi], axis=-1)


def _synthesis_1d(c: np.ndarray, h: np.ndarray, g: np.ndarray) -> np.ndarray:
    N = c.shape[-1]
    lo, hi = c[..., : N // 2], c[..., N // 2:]
    base = 2 * np.arange(N // 2)
    x = np.zeros(c.shape)
    for k in range(len(h)):
        idx = (base + k) % N
        # idx is a permutation within one k, so plain fancy assignment accumulates safely
        x[..., idx] += h[k] * lo + g[k] * hi
    return x


def default_levels(shape) -> int:
    """min(3, log2(min dim) - 2), reduced until both dims divide by 2**levels."""
    m = min(shape[-2:])
    levels = max(0, min(3, int(math.floor(math.log2(m))) - 2))
    while levels and (shape[-1] % 2**levels or shape[-2] % 2**levels):
        levels -= 1
    return levels


class WaveletOp:
    """Orthogonal multilevel 2-D wavelet transform with periodic extension.

    Coefficients are stored in the usual pyramid layout (coarse band in the
    top-left corner), so they have the same shape as the image.
    """

    FAMILIES = {"haar": HAAR, "db4": DB4}

    def __init__(self, family: str = "haar", levels: int | None = None):
        if family not in self.FAMILIES:
            raise ValueError(f"unknown wavelet family {family!r}")
        self.family = family
        self.levels = levels
        self.h = self.FAMILIES[family]
        self.g = _highpass(self.h)

    @classmethod
    def from_config(cls, cfg) -> "WaveletOp":
        return cls(cfg.dictionary, cfg.levels)

    def _levels_for(self, shape) -> int:
        levels = default_levels(shape) if self.levels is None else self.levels
        H, W = shape[-2:]
        if H % 2**levels or W % 2**levels:
            raise ValueError(f"grid {H}x{W} is not divisible by 2**{levels}")
        return levels

    def analysis(self, x) -> np.ndarray:
        c = np.array(x, dtype=np.float64, copy=True)
        H, W = c.shape[-2:]
        for _ in range(self._levels_for(c.shape)):
            block = c[..., :H, :W]
            block = _analysis_1d(block, self.h, self.g)
            block = np.swapaxes(_analysis_1d(np.swapaxes(block, -1, -2), self.h, self.g), -1, -2)
            c[..., :H, :W] = block
            H, W = H // 2, W // 2
        return c

    def synthesis(self, c) -> np.ndarray:
        x = np.array(c, dtype=np.float64, copy=True)
        levels = self._levels_for(x.shape)
        H, W = x.shape[-2:]
        sizes = [(H >> k, W >> k) for k in range(levels)]
        for h, w in reversed(sizes):
            block = x[..., :h, :w]
            block = np.swapaxes(_synthesis_1d(np.swapaxes(block, -1, -2), self.h, self.g), -1, -2)
            block = _synthesis_1d(block, self.h, self.g)
            x[..., :h, :w] = block
        return x


def wavelet_analysis(x, family: str = "haar", levels: int | None = None) -> np.ndarray:
    return WaveletOp(family, levels).analysis(x)


def wavelet_synthesis(c, family: str = "haar", levels: int | None = None) -> np.ndarray:
    return WaveletOp(family, levels).synthesis(c)
