"""Generic ADMM driver and its three instantiations.

The driver solves ``min f(z) + sum_b g_b(A_b z)`` by splitting every
``A_b z`` into an auxiliary variable ``z_b``:

* smooth step: ``z <- argmin f(z) + sum_b rho_b / 2 ||A_b z - z_b + u_b||^2``
  (inexactly, with L-BFGS warm-started from the previous iterate);
* prox step: ``z_b <- prox_{g_b / rho_b}(A_b z + u_b)``;
* dual step: ``u_b <- u_b + A_b z - z_b``.

Duals start at zero and auxiliaries start at ``A_b z0``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .adjoint import QuadraticTerm, SequentialModel, StagePenalty
from .core import SolverConfig
from .lbfgs import LbfgsError, LbfgsParams, LbfgsResult, lbfgs_minimize, strong_wolfe
from .operators import motion_grad, motion_grad_adjoint
from .prox import eval_R, group_shrink, prox_l1

__all__ = [
    "AdmmTrace",
    "ProxBlock",
    "admm",
    "lbfgs_params",
    "solve_convex",
    "solve_step1",
    "solve_motion",
    "motion_surrogate",
    "project_to_split",
    "LbfgsParams",
    "LbfgsResult",
    "LbfgsError",
    "lbfgs_minimize",
    "strong_wolfe",
]


@dataclass
class AdmmTrace:
    residuals: dict = field(default_factory=dict)  # block name -> list of ||A z - z_b||
    objective: list = field(default_factory=list)
    inner_iterations: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)

    @property
    def iterations(self) -> int:
        return len(self.inner_iterations)

    def final_residual(self) -> float:
        return max((r[-1] for r in self.residuals.values() if r), default=0.0)


@dataclass
class ProxBlock:
    """One splitting block: constraint map, proximal map and penalty parameter.

    ``apply(z)`` returns ``A_b z`` (affine offsets included); ``prox(v)``
    returns ``argmin_w g_b(w) + rho / 2 ||w - v||^2``.
    """

    name: str
    rho: float
    apply: Callable
    prox: Callable


def admm(smooth_solve: Callable, z0, blocks: Sequence[ProxBlock], iters: int,
         objective: Callable | None = None, keep_snapshots: bool = False):
    """Run ``iters`` ADMM iterations from ``z0``.

    ``smooth_solve(z, targets)`` returns a new ``z`` approximately minimizing
    ``f(z) + sum_b rho_b / 2 ||A_b z - targets[b]||^2`` starting from ``z``.
    Returns ``(z, aux, duals, trace)``.
    """
    z = z0
    aux = {b.name: np.array(b.apply(z), dtype=np.float64) for b in blocks}
    duals = {b.name: np.zeros_like(aux[b.name]) for b in blocks}
    trace = AdmmTrace(residuals={b.name: [] for b in blocks})
    for _ in range(iters):
        targets = {b.name: aux[b.name] - duals[b.name] for b in blocks}
        z, inner = smooth_solve(z, targets)
        for b in blocks:
            az = b.apply(z)
            aux[b.name] = b.prox(az + duals[b.name])
            violation = az - aux[b.name]
            duals[b.name] = duals[b.name] + violation
            trace.residuals[b.name].append(float(np.linalg.norm(violation)))
        trace.inner_iterations.append(inner)
        if objective is not None:
            trace.objective.append(float(objective(z)))
        if keep_snapshots:
            trace.snapshots.append(z)
    return z, aux, duals, trace


def lbfgs_params(cfg: SolverConfig) -> LbfgsParams:
    return LbfgsParams(memory=cfg.lbfgs_memory, max_iters=cfg.lbfgs_iters, gtol=cfg.lbfgs_gtol)


class _Packer:
    """Flattening of a tuple of arrays into one vector for L-BFGS."""

    def __init__(self, *shapes):
        self.shapes = shapes
        self.sizes = [int(np.prod(s)) for s in shapes]
        self.offsets = np.cumsum([0] + self.sizes)

    def pack(self, *arrays) -> np.ndarray:
        return np.concatenate([np.ravel(a) for a in arrays])

    def unpack(self, v):
        return tuple(v[self.offsets[i]:self.offsets[i + 1]].reshape(s) for i, s in enumerate(self.shapes))


def _ec_smooth_solver(model: SequentialModel, d, warps, params: LbfgsParams, quad_terms: Callable):
    """Smooth step over (eps, c) with fixed motion."""
    T_shape = (model.T,) + model.frame_shape
    packer = _Packer(T_shape, model.frame_shape)

    def solve(z, targets):
        penalty = StagePenalty(quad_terms(targets))

        def fun(v):
            eps, c = packer.unpack(v)
            val, g = model.evaluate(eps, d, c, penalty, blocks="ec", warps=warps)
            return val, packer.pack(g.eps, g.c)

        res = lbfgs_minimize(fun, packer.pack(*z), params)
        return packer.unpack(res.x), res.iterations

    return solve


def _l1_blocks(cfg: SolverConfig):
    return [
        ProxBlock("eps", cfg.rho1, lambda z: z[0], lambda v: prox_l1(v, cfg.alpha1 / cfg.rho1)),
        ProxBlock("c", cfg.rho3, lambda z: z[1], lambda v: prox_l1(v, cfg.alpha3 / cfg.rho3)),
    ]


def _l1_quads(cfg: SolverConfig, targets):
    return [QuadraticTerm("eps", cfg.rho1, targets["eps"]), QuadraticTerm("c", cfg.rho3, targets["c"])]


def _model(y, cfg, model, weights):
    return model if model is not None else SequentialModel(y, cfg, weights)


def solve_convex(y, d, init, cfg: SolverConfig | None = None, *, model: SequentialModel | None = None,
                 weights=None, track_objective: bool = True):
    """Known-motion ``p = 1`` reconstruction: ADMM over (eps, c) with l1 prox blocks.

    ``init`` is ``(eps0, c0)``.  Returns ``(x, eps, c, trace)`` where
    ``(eps, c)`` is the smooth-block iterate and ``x`` its state sequence.
    """
    cfg = cfg or SolverConfig()
    model = _model(y, cfg, model, weights)
    d = np.asarray(getattr(d, "fields", d), dtype=np.float64)
    warps = model.warps(d)
    z0 = tuple(np.array(a, dtype=np.float64) for a in init)
    solver = _ec_smooth_solver(model, d, warps, lbfgs_params(cfg), lambda tg: _l1_quads(cfg, tg))
    obj = None
    if track_objective:
        pen = model.plain_penalty(1)
        obj = lambda z: model.data_value(z[0], d, z[1], warps) + pen.value(z[0], d, z[1])
    z, _, _, trace = admm(solver, z0, _l1_blocks(cfg), cfg.admm_iters, obj)
    eps, c = z
    x = model.synthesize(eps, d, c, warps).x
    return x, eps, c, trace


def solve_step1(y, d, eps_prev, c_prev, cfg: SolverConfig | None = None, *,
                model: SequentialModel | None = None, weights=None, init=None,
                track_objective: bool = True):
    """Residual/coefficient step with the Haar-domain cost-to-move.

    Two extra blocks split ``Haar(eps - eps_prev)`` and ``c - c_prev`` with
    threshold ``gamma / rho``.  With ``gamma = 0`` they carry no penalty and
    are dropped, so the result coincides with :func:`solve_convex`.
    Returns ``(eps, c, trace)``.
    """
    cfg = cfg or SolverConfig()
    model = _model(y, cfg, model, weights)
    d = np.asarray(getattr(d, "fields", d), dtype=np.float64)
    eps_prev = np.asarray(eps_prev, dtype=np.float64)
    c_prev = np.asarray(c_prev, dtype=np.float64)
    warps = model.warps(d)
    haar = model.haar
    blocks = _l1_blocks(cfg)
    coupled = cfg.gamma > 0

    def quads(tg):
        terms = _l1_quads(cfg, tg)
        if coupled:
            terms.append(QuadraticTerm("eps", cfg.rho, tg["delta_eps"],
                                       lambda e: haar.analysis(e - eps_prev), haar.synthesis))
            terms.append(QuadraticTerm("c", cfg.rho, tg["delta_c"], lambda c: c - c_prev))
        return terms

    if coupled:
        thr = cfg.gamma / cfg.rho
        blocks += [
            ProxBlock("delta_eps", cfg.rho, lambda z: haar.analysis(z[0] - eps_prev), lambda v: prox_l1(v, thr)),
            ProxBlock("delta_c", cfg.rho, lambda z: z[1] - c_prev, lambda v: prox_l1(v, thr)),
        ]
    z0 = (eps_prev.copy(), c_prev.copy()) if init is None else tuple(np.array(a, dtype=np.float64) for a in init)
    solver = _ec_smooth_solver(model, d, warps, lbfgs_params(cfg), quads)
    obj = None
    if track_objective:
        obj = lambda z: step1_objective(model, z[0], d, z[1], eps_prev, c_prev, warps)
    z, _, _, trace = admm(solver, z0, blocks, cfg.admm_iters, obj)
    return z[0], z[1], trace


def step1_objective(model: SequentialModel, eps, d, c, eps_prev, c_prev, warps=None) -> float:
    """``J(eps, d, c) + gamma * C(eps - eps_prev, c - c_prev)`` with ``p = 1``."""
    cfg = model.cfg
    value = model.data_value(eps, d, c, warps) + model.plain_penalty(1).value(eps, d, c)
    if cfg.gamma:
        value += cfg.gamma * cost_to_move(model, eps, eps_prev, c, c_prev)
    return value


def cost_to_move(model: SequentialModel, eps, eps_prev, c, c_prev) -> float:
    diff = model.haar.analysis(np.asarray(eps, dtype=np.float64) - eps_prev)
    return float(np.abs(diff).sum() + np.abs(np.asarray(c, dtype=np.float64) - c_prev).sum())


def motion_surrogate(d, d_prev, grad_B, alpha_k: float, alpha2: float, weights=None, p: int = 1) -> float:
    """Linearized data term plus proximal quadratic plus the motion regularizer, minus ``B(d_prev)``."""
    delta = np.asarray(d, dtype=np.float64) - d_prev
    value = float(np.vdot(grad_B, delta)) + 0.5 * alpha_k * float(np.vdot(delta, delta))
    gd = motion_grad(d)
    for t in range(gd.shape[0]):
        value += alpha2 * eval_R(gd[t], None if weights is None else weights[t], p)
    return value


def project_to_split(d, target) -> np.ndarray:
    """Motion closest to ``d`` among the least-squares solutions of ``G* d = target``.

    ``d - (G G*)^+ G (G* d - target)``, computed with the FFT since ``G G*``
    is a periodic Laplacian per component.  The mean of ``d`` is preserved.
    """
    d = np.asarray(d, dtype=np.float64)
    r = motion_grad_adjoint(motion_grad(d) - target)
    H, W = d.shape[-2:]
    lam = (2.0 - 2.0 * np.cos(2 * np.pi * np.fft.fftfreq(H)))[:, None] \
        + (2.0 - 2.0 * np.cos(2 * np.pi * np.fft.fftfreq(W)))[None, :]
    lam[0, 0] = np.inf
    return d - np.real(np.fft.ifft2(np.fft.fft2(r) / lam))


def solve_motion(d_prev, grad_B, alpha_k: float, cfg: SolverConfig | None = None, *, weights=None,
                 init=None, track_objective: bool = True, project: bool = True):
    """Minimize the quadratic motion surrogate plus the weighted group TV by ADMM.

    With ``project`` the returned motion is the smooth-block iterate made
    consistent with the split (group-shrunk) variable, see
    :func:`project_to_split`; a truncated run otherwise leaves small
    non-zero motion gradients everywhere, each paying the full regularizer
    weight.  Returns ``(d, trace)``.
    """
    if not alpha_k > 0:
        raise ValueError("alpha_k must be positive")
    cfg = cfg or SolverConfig()
    d_prev = np.asarray(getattr(d_prev, "fields", d_prev), dtype=np.float64)
    grad_B = np.asarray(getattr(grad_B, "fields", grad_B), dtype=np.float64)
    if weights is None:
        weights = np.ones((d_prev.shape[0],) + d_prev.shape[-2:])
    weights = np.asarray(weights, dtype=np.float64)
    rho2 = cfg.rho2
    params = lbfgs_params(cfg)
    shape = d_prev.shape
    theta = cfg.alpha2 / rho2

    def solve(d, targets):
        target = targets["d"]

        def fun(v):
            dv = v.reshape(shape)
            delta = dv - d_prev
            r = motion_grad(dv) - target
            val = float(np.vdot(grad_B, delta)) + 0.5 * alpha_k * float(np.vdot(delta, delta)) \
                + 0.5 * rho2 * float(np.vdot(r, r))
            g = grad_B + alpha_k * delta + rho2 * motion_grad_adjoint(r)
            return val, g.ravel()

        res = lbfgs_minimize(fun, d.ravel(), params)
        return res.x.reshape(shape), res.iterations

    block = ProxBlock("d", rho2, motion_grad, lambda v: group_shrink(v, weights, theta))
    obj = None
    if track_objective:
        obj = lambda d: motion_surrogate(d, d_prev, grad_B, alpha_k, cfg.alpha2, weights)
    z0 = d_prev.copy() if init is None else np.array(init, dtype=np.float64)
    d, aux, _, trace = admm(solve, z0, [block], cfg.admm_iters, obj)
    if project:
        d = project_to_split(d, aux["d"])
        if track_objective:
            trace.objective.append(float(obj(d)))
    return d, trace
