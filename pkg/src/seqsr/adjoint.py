"""State synthesis, the adjoint sweep and gradient assembly.

Given residuals ``eps``, motions ``d`` and coefficients ``c``, the states are
rebuilt backwards in time (``x_T = D c``, ``x_{t-1} = P(x_t, d_t) + eps_t``)
and the adjoint variables are propagated forwards (``zeta_0`` from the data
term of frame 0, ``zeta_t = P_x^T zeta_{t-1} + grad_x G_t``).  The gradient
of any cost made of per-frame data terms plus separable penalties on
``(eps, d, c)`` then costs two sweeps over the sequence.

Arrays: ``eps`` is (T, [C,] H, W), ``d`` is (T, 2, H, W), ``c`` is ([C,] H, W),
``y`` is (T+1, [C,] H/2, W/2).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .bspline import Warp, prefilter
from .core import ImageSeq, MotionSeq, SolverConfig
from .operators import ObservationOp, WaveletOp, motion_grad, motion_grad_adjoint
from .prox import eval_R

__all__ = [
    "Gradient",
    "States",
    "QuadraticTerm",
    "PlainPenalty",
    "StagePenalty",
    "SequentialModel",
    "synthesize_states",
    "adjoint_sweep",
    "grad_full",
    "grad_motion_dataterm",
]


class Gradient(NamedTuple):
    eps: np.ndarray | None
    d: np.ndarray | None
    c: np.ndarray | None


@dataclass
class States:
    x: np.ndarray  # (T+1, [C,] H, W)
    splines: list  # splines[t] = prefilter(x_t) for t >= 1, splines[0] is None
    warps: list  # warps[t - 1] = Warp(d_t)


def _as_array(v, attr: str | None = None):
    if attr is not None and hasattr(v, attr):
        v = getattr(v, attr)
    return np.asarray(v, dtype=np.float64)


class QuadraticTerm:
    """``rho / 2 * ||op(v) - target||^2`` on one block ``'eps'``, ``'d'`` or ``'c'``.

    ``op`` / ``op_adjoint`` default to the identity.  Every augmented
    Lagrangian quadratic of the ADMM solvers has this shape.
    """

    def __init__(self, block: str, rho: float, target, op: Callable | None = None,
                 op_adjoint: Callable | None = None):
        if block not in ("eps", "d", "c"):
            raise ValueError(f"unknown block {block!r}")
        self.block = block
        self.rho = float(rho)
        self.target = np.asarray(target, dtype=np.float64)
        self.op = op
        self.op_adjoint = op_adjoint

    def _residual(self, v):
        return (self.op(v) if self.op else v) - self.target

    def value(self, eps, d, c) -> float:
        r = self._residual({"eps": eps, "d": d, "c": c}[self.block])
        return 0.5 * self.rho * float(np.vdot(r, r))

    def grad(self, eps, d, c) -> Gradient:
        r = self._residual({"eps": eps, "d": d, "c": c}[self.block])
        g = self.rho * (self.op_adjoint(r) if self.op_adjoint else r)
        return Gradient(**{"eps": None, "d": None, "c": None, self.block: g})


class PlainPenalty:
    """``a1 sum ||eps_t||_p^p + a2 sum R(G* d_t) + a3 ||c||_p^p``.

    Differentiable only for ``p = 2``; for ``p = 1`` only :meth:`value` is
    meaningful.
    """

    def __init__(self, alpha1: float, alpha2: float, alpha3: float, p: int = 2, weights=None):
        self.alpha1, self.alpha2, self.alpha3 = float(alpha1), float(alpha2), float(alpha3)
        self.p = p
        self.weights = None if weights is None else np.asarray(weights, dtype=np.float64)

    def _w(self, t_index):
        return None if self.weights is None else self.weights[t_index]

    def value(self, eps, d, c) -> float:
        if self.p == 2:
            v = self.alpha1 * float(np.vdot(eps, eps)) + self.alpha3 * float(np.vdot(c, c))
        else:
            v = self.alpha1 * float(np.abs(eps).sum()) + self.alpha3 * float(np.abs(c).sum())
        if self.alpha2 and d is not None:
            gd = motion_grad(d)
            v += self.alpha2 * sum(eval_R(gd[t], self._w(t), self.p) for t in range(gd.shape[0]))
        return v

    def grad(self, eps, d, c) -> Gradient:
        if self.p != 2:
            raise ValueError("PlainPenalty is only differentiable for p = 2")
        gd = motion_grad(d)
        if self.weights is not None:
            gd = gd * self.weights[..., None]
        return Gradient(2 * self.alpha1 * eps, 2 * self.alpha2 * motion_grad_adjoint(gd),
                        2 * self.alpha3 * c)


class StagePenalty:
    """Sum of separable penalty terms added to the data term."""

    def __init__(self, terms: Sequence = ()):
        self.terms = list(terms)

    def value(self, eps, d, c) -> float:
        return sum(term.value(eps, d, c) for term in self.terms)

    def grad(self, eps, d, c) -> Gradient:
        acc = {"eps": None, "d": None, "c": None}
        for term in self.terms:
            for key, g in zip(Gradient._fields, term.grad(eps, d, c)):
                if g is not None:
                    acc[key] = g if acc[key] is None else acc[key] + g
        return Gradient(**acc)


class SequentialModel:
    """Observations plus the fixed operators of the sequential model."""

    def __init__(self, y, cfg: SolverConfig | None = None, weights=None):
        self.cfg = cfg or SolverConfig()
        self.y = _as_array(y, "frames")
        if self.y.ndim not in (3, 4):
            raise ValueError("observations must have shape (T+1, [C,] h, w)")
        self.obs = ObservationOp.from_config(self.cfg)
        self.dictionary = WaveletOp.from_config(self.cfg)
        self.haar = WaveletOp("haar", self.cfg.levels)
        self.fd_step = self.cfg.fd_step
        self.frame_shape = self.y.shape[1:-2] + (2 * self.y.shape[-2], 2 * self.y.shape[-1])
        self.grid_shape = self.frame_shape[-2:]
        if weights is None:
            weights = np.ones((self.T,) + self.grid_shape)
        self.weights = np.asarray(weights, dtype=np.float64)

    @property
    def T(self) -> int:
        return self.y.shape[0] - 1

    # ------------------------------------------------------------------ states
    def warps(self, d) -> list:
        d = _as_array(d, "fields")
        if d.shape != (self.T, 2) + self.grid_shape:
            raise ValueError(f"motion shape {d.shape} inconsistent with observations")
        return [Warp(d[t], fd_step=self.fd_step) for t in range(self.T)]

    def synthesize(self, eps, d, c, warps=None) -> States:
        eps = _as_array(eps, "residuals")
        c = _as_array(c, "coeffs")
        if eps.shape != (self.T,) + self.frame_shape:
            raise ValueError(f"residual shape {eps.shape} inconsistent with observations")
        if c.shape != self.frame_shape:
            raise ValueError(f"coefficient shape {c.shape} inconsistent with observations")
        if warps is None:
            warps = self.warps(d)
        x = np.empty((self.T + 1,) + self.frame_shape)
        splines = [None] * (self.T + 1)
        x[self.T] = self.dictionary.synthesis(c)
        for t in range(self.T, 0, -1):
            splines[t] = prefilter(x[t])
            x[t - 1] = warps[t - 1](splines[t]) + eps[t - 1]
        return States(x=x, splines=splines, warps=warps)

    def residuals(self, x) -> np.ndarray:
        return self.obs(x) - self.y

    def data_term(self, x) -> float:
        r = self.residuals(x)
        return float(np.vdot(r, r))

    def adjoint_sweep(self, states: States, data_weight: float = 1.0) -> np.ndarray:
        r = self.residuals(states.x)
        forcing = (2.0 * data_weight) * self.obs.adjoint(r)
        zetas = np.empty_like(states.x)
        zetas[0] = forcing[0]
        for t in range(1, self.T + 1):
            zetas[t] = states.warps[t - 1].adjoint(zetas[t - 1]) + forcing[t]
        return zetas

    # --------------------------------------------------------------- gradients
    def evaluate(self, eps, d, c, penalty=None, blocks: str = "edc", warps=None,
                 data_weight: float = 1.0):
        """Value and gradient of ``data_weight * data + penalty`` at ``(eps, d, c)``.

        ``blocks`` selects which gradient blocks are assembled (any of
        ``e``, ``d``, ``c``); the others are returned as ``None``.
        """
        eps = _as_array(eps, "residuals")
        d = _as_array(d, "fields")
        c = _as_array(c, "coeffs")
        states = self.synthesize(eps, d, c, warps)
        r = self.residuals(states.x)
        value = data_weight * float(np.vdot(r, r))
        zetas = self.adjoint_sweep(states, data_weight)
        g_eps = zetas[:-1].copy() if "e" in blocks else None
        g_d = None
        if "d" in blocks:
            g_d = np.empty((self.T, 2) + self.grid_shape)
            for t in range(1, self.T + 1):
                g_d[t - 1] = states.warps[t - 1].motion_gradient(states.splines[t], zetas[t - 1])
        g_c = self.dictionary.analysis(zetas[-1]) if "c" in blocks else None
        if penalty is not None:
            value += penalty.value(eps, d, c)
            pg = penalty.grad(eps, d, c)
            if g_eps is not None and pg.eps is not None:
                g_eps += pg.eps
            if g_d is not None and pg.d is not None:
                g_d += pg.d
            if g_c is not None and pg.c is not None:
                g_c += pg.c
        return value, Gradient(g_eps, g_d, g_c)

    def plain_penalty(self, p: int | None = None) -> PlainPenalty:
        cfg = self.cfg
        return PlainPenalty(cfg.alpha1, cfg.alpha2, cfg.alpha3, p or cfg.p, self.weights)

    def objective(self, eps, d, c, p: int | None = None) -> float:
        """The full cost: data term plus the weighted ``p``-penalties."""
        eps = _as_array(eps, "residuals")
        d = _as_array(d, "fields")
        c = _as_array(c, "coeffs")
        states = self.synthesize(eps, d, c)
        return self.data_term(states.x) + self.plain_penalty(p).value(eps, d, c)

    def data_value(self, eps, d, c, warps=None) -> float:
        return self.data_term(self.synthesize(eps, d, c, warps).x)


def _model_for(y, model, cfg):
    if model is not None:
        return model
    if y is None:
        raise ValueError("either observations or a model are required")
    return SequentialModel(y, cfg)


def synthesize_states(eps, d, c, model: SequentialModel | None = None, cfg=None,
                      dictionary: WaveletOp | None = None) -> ImageSeq:
    """Unique state sequence satisfying the model constraints for ``(eps, d, c)``."""
    eps = _as_array(eps, "residuals")
    d = _as_array(d, "fields")
    c = _as_array(c, "coeffs")
    if model is not None:
        return ImageSeq(model.synthesize(eps, d, c).x)
    cfg = cfg or SolverConfig()
    dictionary = dictionary or WaveletOp.from_config(cfg)
    T = eps.shape[0]
    if d.shape[0] != T:
        raise ValueError("eps and d must have the same number of frames")
    x = np.empty((T + 1,) + c.shape)
    x[T] = dictionary.synthesis(c)
    for t in range(T, 0, -1):
        x[t - 1] = Warp(d[t - 1], cfg.fd_step)(prefilter(x[t])) + eps[t - 1]
    return ImageSeq(x)


def adjoint_sweep(x, d, y, model: SequentialModel | None = None, cfg=None) -> np.ndarray:
    """Adjoint variables ``zeta_0 .. zeta_T`` for the data term at states ``x``."""
    model = _model_for(y, model, cfg)
    x = _as_array(x, "frames")
    warps = model.warps(d)
    states = States(x=x, splines=[None] * len(x), warps=warps)
    return model.adjoint_sweep(states)


def grad_full(eps, d, c, y=None, penalty=None, model: SequentialModel | None = None,
              cfg=None) -> Gradient:
    """Gradient of data term + ``penalty`` with respect to ``(eps, d, c)``.

    Without an explicit penalty the plain ``p = 2`` cost of the model's
    configuration is used.
    """
    model = _model_for(y, model, cfg)
    if penalty is None:
        penalty = model.plain_penalty(2)
    return model.evaluate(eps, d, c, penalty)[1]


def grad_motion_dataterm(eps, d, c, y=None, model: SequentialModel | None = None,
                         cfg=None) -> MotionSeq:
    """Gradient of the data term alone with respect to the motion."""
    model = _model_for(y, model, cfg)
    return MotionSeq(model.evaluate(eps, d, c, None, blocks="d")[1].d)
