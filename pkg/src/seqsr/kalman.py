"""Dense Kalman smoother for the quadratic (p = 2) model with known motion.

For fixed motion the p = 2 cost is, up to a factor 2 and a constant, the
negative log-posterior of the linear-Gaussian model

    x_T ~ N(0, D D* / alpha3),  x_t ~ N(P_{t+1} x_{t+1}, I / alpha1),  y_t ~ N(H x_t, I),

so its minimizer is the posterior mean, which a forward filter followed by
a Rauch-Tung-Striebel backward pass computes exactly.  Everything is dense
(O(n^3 T)), hence only meant for tiny grids as a reference solution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .bspline import Warp, prefilter
from .core import ImageSeq, SolverConfig
from .operators import ObservationOp, WaveletOp

__all__ = ["KalmanError", "GaussianStateModel", "dense_matrix", "build_dense_model", "smooth_map"]

MAX_PIXELS = 256


class KalmanError(RuntimeError):
    """An innovation covariance was not positive definite."""


@dataclass
class GaussianStateModel:
    transitions: list  # transitions[t - 1]: dense matrix of x_t -> P(x_t, d_t), t = 1..T
    H: np.ndarray
    prior_cov: np.ndarray
    process_cov: np.ndarray
    obs_cov: np.ndarray
    shape: tuple

    @property
    def T(self) -> int:
        return len(self.transitions)


def dense_matrix(op, shape) -> np.ndarray:
    """Matrix of a linear map on ``shape``-frames, built by probing basis vectors."""
    n = int(np.prod(shape))
    cols = []
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        cols.append(np.ravel(op(e.reshape(shape))))
    return np.stack(cols, axis=1)


def build_dense_model(d, cfg: SolverConfig | None = None) -> GaussianStateModel:
    cfg = cfg or SolverConfig()
    if not (cfg.alpha1 > 0 and cfg.alpha3 > 0):
        raise ValueError("alpha1 and alpha3 must be positive for proper Gaussian covariances")
    d = np.asarray(getattr(d, "fields", d), dtype=np.float64)
    if d.ndim != 4 or d.shape[1] != 2:
        raise ValueError("motion must have shape (T, 2, H, W)")
    shape = d.shape[-2:]
    n = shape[0] * shape[1]
    if n > MAX_PIXELS:
        raise ValueError(f"dense model limited to {MAX_PIXELS} pixels, got {n}")
    transitions = []
    for t in range(d.shape[0]):
        w = Warp(d[t], cfg.fd_step)
        transitions.append(dense_matrix(lambda x, w=w: w(prefilter(x)), shape))
    H = dense_matrix(ObservationOp.from_config(cfg), shape)
    D = dense_matrix(WaveletOp.from_config(cfg).synthesis, shape)
    return GaussianStateModel(
        transitions=transitions,
        H=H,
        prior_cov=D @ D.T / cfg.alpha3,
        process_cov=np.eye(n) / cfg.alpha1,
        obs_cov=np.eye(H.shape[0]),
        shape=tuple(shape),
    )


def _update(m, P, y, H, R):
    S = H @ P @ H.T + R
    S = 0.5 * (S + S.T)
    try:
        cf = linalg.cho_factor(S)
    except linalg.LinAlgError as exc:
        raise KalmanError("innovation covariance is not positive definite") from exc
    K = linalg.cho_solve(cf, H @ P).T
    m = m + K @ (y - H @ m)
    P = P - K @ H @ P
    return m, 0.5 * (P + P.T)


def smooth_map(y, model: GaussianStateModel) -> ImageSeq:
    """Posterior mean of the whole sequence given all observations."""
    y = np.asarray(getattr(y, "frames", y), dtype=np.float64)
    T = model.T
    if y.shape[0] != T + 1:
        raise ValueError("observation count does not match the model")
    n = model.H.shape[1]
    # reversed time: state s is frame T - s, and the transition into state s
    # is the warp of motion d_{T-s+1}
    obs = [y[T - s].ravel() for s in range(T + 1)]
    F = [None] + [model.transitions[T - s] for s in range(1, T + 1)]
    m_pred, P_pred, m_filt, P_filt = [], [], [], []
    m, P = np.zeros(n), model.prior_cov.copy()
    for s in range(T + 1):
        if s > 0:
            m = F[s] @ m
            P = F[s] @ P @ F[s].T + model.process_cov
        m_pred.append(m)
        P_pred.append(P)
        m, P = _update(m, P, obs[s], model.H, model.obs_cov)
        m_filt.append(m)
        P_filt.append(P)
    smoothed = [None] * (T + 1)
    smoothed[T] = m_filt[T]
    for s in range(T - 1, -1, -1):
        try:
            G = linalg.solve(P_pred[s + 1], F[s + 1] @ P_filt[s], assume_a="pos").T
        except linalg.LinAlgError as exc:
            raise KalmanError("predicted covariance is singular") from exc
        smoothed[s] = m_filt[s] + G @ (smoothed[s + 1] - m_pred[s + 1])
    frames = np.stack([smoothed[T - t].reshape(model.shape) for t in range(T + 1)])
    return ImageSeq(frames)
