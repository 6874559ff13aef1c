"""Cubic B-spline image model and the displaced-frame warping operator.

An image is represented by B-spline coefficients obtained with the periodic
recursive prefilter; warping samples that continuous representation at the
displaced positions ``chi(s) + d(s)``.  Everything here assumes periodic
boundaries, which makes the prefilter a symmetric matrix.
"""

from __future__ import annotations

import numpy as np
from scipy import sparse
from scipy.signal import lfilter

__all__ = [
    "POLE",
    "bspline3",
    "prefilter",
    "Warp",
    "warp",
    "warp_adjoint_image",
    "warp_jacobian_motion_apply",
]

POLE = np.sqrt(3.0) - 2.0


def bspline3(u):
    """Centered cubic B-spline, support (-2, 2)."""
    a = np.abs(np.asarray(u, dtype=np.float64))
    out = np.zeros_like(a)
    inner = a < 1.0
    outer = (a >= 1.0) & (a < 2.0)
    out[inner] = 2.0 / 3.0 - a[inner] ** 2 + 0.5 * a[inner] ** 3
    out[outer] = (2.0 - a[outer]) ** 3 / 6.0
    return out if out.ndim else float(out)


def _prefilter_last_axis(a: np.ndarray) -> np.ndarray:
    z = POLE
    N = a.shape[-1]
    powers = z ** np.arange(N)
    gain = 1.0 / (1.0 - z**N)
    # causal pass, initial value summed exactly over one period
    backwards = np.concatenate([a[..., :1], a[..., :0:-1]], axis=-1)
    c0 = (backwards @ powers) * gain
    causal, _ = lfilter([1.0], [1.0, -z], a, axis=-1, zi=(c0 - a[..., 0])[..., None])
    # anticausal pass run on the reversed signal
    rotated = np.concatenate([causal[..., -1:], causal[..., :-1]], axis=-1)
    last = -z * gain * (rotated @ powers)
    rev = causal[..., ::-1]
    anti, _ = lfilter([-z], [1.0, -z], rev, axis=-1, zi=(last + z * rev[..., 0])[..., None])
    return 6.0 * anti[..., ::-1]


def prefilter(image) -> np.ndarray:
    """Spline coefficients interpolating ``image`` on its (periodic) pixel grid.

    Operates on the last two axes, so a stack of frames or channels is
    filtered independently.
    """
    a = np.asarray(image, dtype=np.float64)
    if a.ndim < 2 or min(a.shape[-2:]) < 4:
        raise ValueError("prefilter needs frames of at least 4x4 pixels")
    if not np.all(np.isfinite(a)):
        raise ValueError("prefilter input contains non-finite values")
    out = _prefilter_last_axis(a)
    out = np.swapaxes(_prefilter_last_axis(np.swapaxes(out, -1, -2)), -1, -2)
    return np.ascontiguousarray(out)


def _interp_matrix(rows: np.ndarray, cols: np.ndarray, shape: tuple[int, int]) -> sparse.csr_matrix:
    """Sparse n x n matrix sampling spline coefficients at (rows, cols)."""
    H, W = shape
    n = H * W
    rows = rows.reshape(-1)
    cols = cols.reshape(-1)
    offsets = np.arange(-1, 3)
    r0 = np.floor(rows)
    c0 = np.floor(cols)
    ri = r0[:, None] + offsets  # (n, 4)
    ci = c0[:, None] + offsets
    wr = bspline3(rows[:, None] - ri)
    wc = bspline3(cols[:, None] - ci)
    ri = np.mod(ri, H).astype(np.int64)
    ci = np.mod(ci, W).astype(np.int64)
    idx = (ri[:, :, None] * W + ci[:, None, :]).reshape(n, 16)
    val = (wr[:, :, None] * wc[:, None, :]).reshape(n, 16)
    indptr = np.arange(0, 16 * n + 1, 16)
    return sparse.csr_matrix((val.ravel(), idx.ravel(), indptr), shape=(n, n))


class Warp:
    """The displaced-frame operator for one motion field ``d`` of shape (2, H, W).

    ``Warp(d)(coeffs)`` evaluates the spline with coefficients ``coeffs`` at
    ``(row + d[1], col + d[0])`` for every pixel.  The sampling matrix is built
    once so that repeated applications with the same motion are cheap.

    ``fd_step`` is the step of the centered differences used for the spatial
    derivatives of the warped image (the motion Jacobian).
    """

    def __init__(self, d, fd_step: float = 1e-4):
        d = np.asarray(d, dtype=np.float64)
        if d.ndim != 3 or d.shape[0] != 2:
            raise ValueError("motion field must have shape (2, H, W)")
        if not np.all(np.isfinite(d)):
            raise ValueError("motion field contains non-finite displacements")
        self.d = d
        self.shape = d.shape[1:]
        self.fd_step = float(fd_step)
        H, W = self.shape
        self._rows = np.arange(H, dtype=np.float64)[:, None] + d[1]
        self._cols = np.arange(W, dtype=np.float64)[None, :] + d[0]
        self.matrix = _interp_matrix(self._rows, self._cols, self.shape)
        self._derivs = None

    def _flat(self, a: np.ndarray) -> tuple[np.ndarray, tuple]:
        a = np.asarray(a, dtype=np.float64)
        if a.shape[-2:] != self.shape:
            raise ValueError(f"frame shape {a.shape[-2:]} does not match motion grid {self.shape}")
        lead = a.shape[:-2]
        return a.reshape(-1, self.shape[0] * self.shape[1]).T, lead

    def _unflat(self, m: np.ndarray, lead: tuple) -> np.ndarray:
        return np.ascontiguousarray(m.T).reshape(lead + self.shape)

    def __call__(self, coeffs) -> np.ndarray:
        m, lead = self._flat(coeffs)
        return self._unflat(self.matrix @ m, lead)

    def scatter(self, zeta) -> np.ndarray:
        """Transpose of the sampling step (no spline transform)."""
        m, lead = self._flat(zeta)
        return self._unflat(self.matrix.T @ m, lead)

    def adjoint(self, zeta) -> np.ndarray:
        """Transpose of ``x -> self(prefilter(x))``."""
        return prefilter(self.scatter(zeta))

    def _derivative_matrices(self):
        if self._derivs is None:
            h = self.fd_step
            shape = self.shape
            dcol = (_interp_matrix(self._rows, self._cols + h, shape)
                    - _interp_matrix(self._rows, self._cols - h, shape)) / (2 * h)
            drow = (_interp_matrix(self._rows + h, self._cols, shape)
                    - _interp_matrix(self._rows - h, self._cols, shape)) / (2 * h)
            self._derivs = (dcol.tocsr(), drow.tocsr())
        return self._derivs

    def spatial_derivatives(self, coeffs) -> np.ndarray:
        """Horizontal and vertical derivatives of the warped image, shape (2, [C,] H, W)."""
        dcol, drow = self._derivative_matrices()
        m, lead = self._flat(coeffs)
        return np.stack([self._unflat(dcol @ m, lead), self._unflat(drow @ m, lead)])

    def motion_gradient(self, coeffs, zeta) -> np.ndarray:
        """Jacobian-transpose action on ``zeta``: d/d(d) of <warp(coeffs, d), zeta>.

        Channels (any axes in front of the grid) are summed, because all of
        them share the same motion.
        """
        grads = self.spatial_derivatives(coeffs) * np.asarray(zeta, dtype=np.float64)
        if grads.ndim > 3:
            grads = grads.reshape((2, -1) + self.shape).sum(axis=1)
        return grads


def warp(coeffs, d) -> np.ndarray:
    return Warp(d)(coeffs)


def warp_adjoint_image(zeta, d) -> np.ndarray:
    return Warp(d).adjoint(zeta)


def warp_jacobian_motion_apply(coeffs, d, zeta, fd_step: float = 1e-4) -> np.ndarray:
    return Warp(d, fd_step=fd_step).motion_gradient(coeffs, zeta)
