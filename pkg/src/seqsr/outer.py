"""Objective evaluation and the two-step outer recursion.

Each outer iteration first refines ``(eps, c)`` at fixed motion with a
cost-to-move penalty, then updates the motion by minimizing a quadratic
surrogate of the data term plus the motion regularizer, with the surrogate
curvature chosen by doubling until the acceptance inequality holds.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .adjoint import SequentialModel
from .admm import solve_motion, solve_step1, step1_objective
from .bspline import Warp, prefilter
from .core import SolverConfig
from .operators import WaveletOp, motion_grad
from .prox import eval_R

__all__ = [
    "BacktrackError",
    "OuterTrace",
    "BacktrackResult",
    "SuperResult",
    "eval_J",
    "eval_cost_to_move",
    "regularizer",
    "backtracking_margin",
    "check_backtracking_inequality",
    "backtrack_alpha",
    "lanczos_kernel",
    "lanczos_upscale",
    "edge_weights",
    "initialize",
    "super_resolve",
]

log = logging.getLogger(__name__)

MAX_DOUBLINGS = 40


class BacktrackError(RuntimeError):
    """No curvature up to ``2**40 * xi`` satisfied the acceptance inequality."""


def eval_J(eps, d, c, y, cfg: SolverConfig | None = None, weights=None,
           model: SequentialModel | None = None) -> float:
    """Full cost with ``p = cfg.p``: data term plus weighted penalties."""
    model = model or SequentialModel(y, cfg, weights)
    return model.objective(eps, d, c)


def eval_cost_to_move(eps, eps_prev, c, c_prev, levels: int | None = None) -> float:
    """Haar-domain l1 distance of the residuals plus l1 distance of the coefficients."""
    haar = WaveletOp("haar", levels)
    diff = haar.analysis(np.asarray(eps, dtype=np.float64) - np.asarray(eps_prev, dtype=np.float64))
    return float(np.abs(diff).sum() + np.abs(np.asarray(c, dtype=np.float64) - c_prev).sum())


def regularizer(d, weights=None, p: int = 1) -> float:
    """``sum_t R(G* d_t)``."""
    gd = motion_grad(d)
    return sum(eval_R(gd[t], None if weights is None else weights[t], p) for t in range(gd.shape[0]))


def backtracking_margin(B_new: float, B_prev: float, d_new, d_prev, grad_B, i: int, xi: float,
                        alpha2: float, weights=None, p: int = 1) -> float:
    """Right-hand side minus left-hand side of the acceptance inequality (>= 0 means accepted)."""
    delta = np.asarray(d_new, dtype=np.float64) - np.asarray(d_prev, dtype=np.float64)
    rhs = ((2.0**i - 1.0) * xi / 2.0) * float(np.vdot(delta, delta)) + float(np.vdot(grad_B, delta)) \
        + alpha2 * (regularizer(d_prev, weights, p) - regularizer(d_new, weights, p))
    return rhs - (B_new - B_prev)


def check_backtracking_inequality(B_new, B_prev, d_new, d_prev, grad_B, i, xi, alpha2,
                                  weights=None, p: int = 1) -> bool:
    return backtracking_margin(B_new, B_prev, d_new, d_prev, grad_B, i, xi, alpha2, weights, p) >= 0.0


@dataclass
class BacktrackResult:
    alpha: float
    d: np.ndarray
    i: int
    trials: int
    B: float
    kept: bool = False  # True when the previous motion was retained


def backtrack_alpha(candidate: Callable, d_prev, grad_B, cfg: SolverConfig, B: Callable,
                    B_prev: float | None = None, weights=None, monotone: bool = True) -> BacktrackResult:
    """Doubling search ``alpha = 2**i * xi``, ``i = 1, 2, ...``.

    ``candidate(alpha)`` returns the motion step for curvature ``alpha`` and
    ``B(d)`` evaluates the data term.  The first ``i`` whose step satisfies
    the acceptance inequality is taken.  With ``monotone`` the step must in
    addition not increase ``B + alpha2 * R``; if no step up to 40 doublings
    does, the previous motion is kept (a zero step satisfies the inequality
    with equality).
    """
    d_prev = np.asarray(d_prev, dtype=np.float64)
    if B_prev is None:
        B_prev = B(d_prev)
    xi, a2, p = cfg.xi, cfg.alpha2, cfg.p
    R_prev = regularizer(d_prev, weights, p)
    satisfied_once = False
    for i in range(1, MAX_DOUBLINGS + 1):
        alpha = 2.0**i * xi
        d_new = np.asarray(candidate(alpha), dtype=np.float64)
        B_new = B(d_new)
        if not check_backtracking_inequality(B_new, B_prev, d_new, d_prev, grad_B, i, xi, a2, weights, p):
            continue
        satisfied_once = True
        if monotone and B_new + a2 * regularizer(d_new, weights, p) > B_prev + a2 * R_prev:
            continue
        return BacktrackResult(alpha, d_new, i, i, B_new)
    if not satisfied_once:
        raise BacktrackError(f"acceptance inequality failed for all {MAX_DOUBLINGS} doublings")
    log.info("no decreasing motion step found; keeping the previous motion")
    return BacktrackResult(2.0 * xi, d_prev.copy(), 1, MAX_DOUBLINGS, B_prev, kept=True)


def lanczos_kernel(x, a: int = 3):
    x = np.asarray(x, dtype=np.float64)
    return np.where(np.abs(x) < a, np.sinc(x) * np.sinc(x / a), 0.0)


def _lanczos_upscale_axis(img: np.ndarray, axis: int, a: int) -> np.ndarray:
    img = np.moveaxis(img, axis, -1)
    n = img.shape[-1]
    out = np.empty(img.shape[:-1] + (2 * n,))
    out[..., ::2] = img
    offsets = np.arange(-a + 1, a + 1)  # LR neighbours of the half-way position k + 0.5
    taps = lanczos_kernel(0.5 - offsets, a)
    taps /= taps.sum()
    half = np.zeros_like(img)
    for o, w in zip(offsets, taps):
        half += w * np.roll(img, -o, axis=-1)
    out[..., 1::2] = half
    return np.moveaxis(out, -1, axis)


def lanczos_upscale(y, a: int = 3) -> np.ndarray:
    """Separable periodic x2 Lanczos interpolation; LR pixel k lands on HR pixel 2k."""
    y = np.asarray(y, dtype=np.float64)
    return _lanczos_upscale_axis(_lanczos_upscale_axis(y, -1, a), -2, a)


def edge_weights(y, kappa: float = 0.1, multichannel: bool = False) -> np.ndarray:
    """Per-pixel motion-regularizer weights ``exp(-kappa * |grad up(y_t)|)`` for t = 1..T."""
    y = np.asarray(y, dtype=np.float64)
    up = lanczos_upscale(y[1:])
    if multichannel:
        up = up.mean(axis=1)
    gx = np.roll(up, -1, axis=-1) - up
    gy = np.roll(up, -1, axis=-2) - up
    return np.exp(-kappa * np.sqrt(gx * gx + gy * gy))


def initialize(y, d0, dictionary: WaveletOp, fd_step: float = 1e-4):
    """Feasible starting point reproducing the Lanczos-upscaled frames exactly."""
    x = lanczos_upscale(y)
    T = x.shape[0] - 1
    c = dictionary.analysis(x[T])
    eps = np.empty((T,) + x.shape[1:])
    for t in range(1, T + 1):
        eps[t - 1] = x[t - 1] - Warp(d0[t - 1], fd_step)(prefilter(x[t]))
    return x, eps, c


@dataclass
class OuterTrace:
    J0: float = float("nan")
    J: list = field(default_factory=list)
    alpha: list = field(default_factory=list)
    trials: list = field(default_factory=list)
    B: list = field(default_factory=list)
    mepe: list = field(default_factory=list)
    step1_kept: list = field(default_factory=list)
    motion_kept: list = field(default_factory=list)
    # data needed to re-check the acceptance inequality afterwards
    accepted: list = field(default_factory=list)

    def rows(self):
        for k in range(len(self.J)):
            yield {
                "iter": k + 1,
                "J": self.J[k],
                "alpha": self.alpha[k],
                "trials": self.trials[k],
                "B": self.B[k],
                "mepe": self.mepe[k] if self.mepe else float("nan"),
            }


@dataclass
class SuperResult:
    x: np.ndarray
    eps: np.ndarray
    d: np.ndarray
    c: np.ndarray
    trace: OuterTrace
    x_init: np.ndarray


def super_resolve(y, cfg: SolverConfig | None = None, d_init=None, d_true=None, weights=None,
                  monotone: bool = True, keep_accepted: bool = False,
                  callback: Callable | None = None) -> SuperResult:
    """Joint estimation of the high-resolution sequence and the motion.

    ``y`` is (T+1, [C,] h, w).  ``d_init`` defaults to zero motion.  When
    ``d_true`` is given the trace records the endpoint error per iteration.
    With ``monotone`` a step that would increase the cost is discarded.
    """
    from .metrics import mepe

    cfg = cfg or SolverConfig()
    y = np.asarray(getattr(y, "frames", y), dtype=np.float64)
    multichannel = y.ndim == 4
    T = y.shape[0] - 1
    grid = (2 * y.shape[-2], 2 * y.shape[-1])
    d = np.zeros((T, 2) + grid) if d_init is None else np.array(getattr(d_init, "fields", d_init), dtype=np.float64)
    if d.shape != (T, 2) + grid:
        raise ValueError(f"initial motion shape {d.shape} does not match the sequence grid {grid}")
    if weights is None:
        if cfg.weights_mode == "edge" and T > 0:
            weights = edge_weights(y, cfg.kappa, multichannel)
        else:
            weights = np.ones((T,) + grid)
    model = SequentialModel(y, cfg, weights)
    x_init, eps, c = initialize(y, d, model.dictionary, cfg.fd_step)
    trace = OuterTrace(J0=model.objective(eps, d, c))
    J_cur = trace.J0
    for it in range(cfg.outer_iters):
        # step 1: residuals and coefficients at fixed motion
        kept1 = False
        eps_new, c_new, _ = solve_step1(y, d, eps, c, cfg, model=model, track_objective=False)
        if monotone and step1_objective(model, eps_new, d, c_new, eps, c) > J_cur:
            kept1 = True
        else:
            eps, c = eps_new, c_new
        # step 2: motion
        kept2 = False
        alpha, trials = float("nan"), 0
        if T > 0:
            B_prev, g = model.evaluate(eps, d, c, None, blocks="d")
            grad_B = g.d
            d_prev = d

            def candidate(a, _d=d_prev, _g=grad_B):
                return solve_motion(_d, _g, a, cfg, weights=weights, track_objective=False)[0]

            res = backtrack_alpha(candidate, d_prev, grad_B, cfg, lambda dd: model.data_value(eps, dd, c),
                                  B_prev, weights, monotone)
            d, alpha, trials, kept2 = res.d, res.alpha, res.trials, res.kept
            if keep_accepted:
                trace.accepted.append(dict(B_new=res.B, B_prev=B_prev, d_new=res.d, d_prev=d_prev,
                                           grad_B=grad_B, i=res.i, kept=res.kept, eps=eps, c=c))
            B_cur = res.B
        else:
            B_cur = model.data_value(eps, d, c)
        J_cur = model.objective(eps, d, c)
        trace.J.append(J_cur)
        trace.alpha.append(alpha)
        trace.trials.append(trials)
        trace.B.append(B_cur)
        trace.step1_kept.append(kept1)
        trace.motion_kept.append(kept2)
        if d_true is not None:
            trace.mepe.append(mepe(d, d_true))
        log.info("outer %d: J=%.6g alpha=%g trials=%d", it + 1, J_cur, alpha, trials)
        if callback is not None:
            callback(it, trace)
    x = model.synthesize(eps, d, c).x
    return SuperResult(x=x, eps=eps, d=d, c=c, trace=trace, x_init=x_init)
