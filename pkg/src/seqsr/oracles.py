"""Dense reference operators and the self-check suite.

The dense matrices here are assembled from closed-form definitions (kernel
values, circulant systems, explicit filter-bank rows) rather than by probing
the fast operators, so comparing the two is a genuine check.  Only meant for
grids of a few hundred pixels.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .adjoint import QuadraticTerm, SequentialModel, StagePenalty
from .bspline import Warp, bspline3, prefilter
from .core import SolverConfig
from .operators import (DB4, HAAR, ObservationOp, default_levels, kernel_taps,
                        motion_grad, motion_grad_adjoint)
from .prox import group_shrink, prox_l1

__all__ = [
    "dense_circulant",
    "dense_prefilter",
    "dense_sampling",
    "dense_warp",
    "dense_observation",
    "dense_motion_grad",
    "dense_wavelet",
    "CheckResult",
    "rel_err",
    "fd_gradient_errors",
    "penalty_configurations",
    "run_gradcheck",
    "run_kalman_check",
]


def dense_circulant(first_col) -> np.ndarray:
    c = np.asarray(first_col, dtype=np.float64)
    n = len(c)
    return np.stack([np.roll(c, j) for j in range(n)], axis=1)


def _periodic_kernel_1d(n: int, taps) -> np.ndarray:
    """Circulant matrix of a centered symmetric filter of odd length."""
    taps = np.asarray(taps, dtype=np.float64)
    r = len(taps) // 2
    col = np.zeros(n)
    for k, w in enumerate(taps):
        col[(k - r) % n] += w
    return dense_circulant(col)


def dense_prefilter(shape) -> np.ndarray:
    """Inverse of the periodic sampled-B-spline system ``[1, 4, 1] / 6`` on both axes."""
    H, W = shape
    Bh = _periodic_kernel_1d(H, [1 / 6, 4 / 6, 1 / 6])
    Bw = _periodic_kernel_1d(W, [1 / 6, 4 / 6, 1 / 6])
    return np.linalg.inv(np.kron(Bh, Bw))


def _wrap(delta, n):
    return (delta + n / 2.0) % n - n / 2.0


def dense_sampling(d, shape) -> np.ndarray:
    """Matrix evaluating a periodic cubic spline at ``(row + d[1], col + d[0])``."""
    H, W = shape
    rows, cols = np.mgrid[0:H, 0:W]
    pr = (rows + d[1]).ravel()
    pc = (cols + d[0]).ravel()
    kr, kc = rows.ravel(), cols.ravel()
    wr = bspline3(_wrap(pr[:, None] - kr[None, :], H))
    wc = bspline3(_wrap(pc[:, None] - kc[None, :], W))
    return wr * wc


def dense_warp(d, shape) -> np.ndarray:
    """Matrix of ``x -> warp(prefilter(x), d)``."""
    return dense_sampling(d, shape) @ dense_prefilter(shape)


def dense_observation(shape, taps) -> np.ndarray:
    H, W = shape
    blur = np.kron(_periodic_kernel_1d(H, taps), _periodic_kernel_1d(W, taps))
    keep = [r * W + c for r in range(0, H, 2) for c in range(0, W, 2)]
    return blur[keep]


def dense_motion_grad(shape) -> np.ndarray:
    """Matrix of the forward-difference operator mapping (2, H, W) to (H, W, 4)."""
    H, W = shape
    Dx = np.kron(np.eye(H), _forward_diff(W))
    Dy = np.kron(_forward_diff(H), np.eye(W))
    n = H * W
    out = np.zeros((4 * n, 2 * n))
    # group layout per pixel: [dx u, dy u, dx v, dy v]
    for k, (comp, op) in enumerate([(0, Dx), (0, Dy), (1, Dx), (1, Dy)]):
        out[k::4, comp * n:(comp + 1) * n] = op
    return out


def _forward_diff(n: int) -> np.ndarray:
    return np.roll(np.eye(n), 1, axis=1) - np.eye(n)


def _filter_bank_1d(n: int, h: np.ndarray) -> np.ndarray:
    """One periodized analysis level: low-pass rows then high-pass rows."""
    L = len(h)
    g = np.array([(-1) ** k * h[L - 1 - k] for k in range(L)])
    M = np.zeros((n, n))
    for k in range(n // 2):
        for j in range(L):
            M[k, (2 * k + j) % n] += h[j]
            M[n // 2 + k, (2 * k + j) % n] += g[j]
    return M


def dense_wavelet(shape, family: str = "haar", levels: int | None = None) -> np.ndarray:
    """Analysis matrix of the multilevel 2-D transform in pyramid layout."""
    h = {"haar": HAAR, "db4": DB4}[family]
    H, W = shape
    levels = default_levels(shape) if levels is None else levels
    A = np.eye(H * W)
    h_cur, w_cur = H, W
    for _ in range(levels):
        level = np.eye(H * W)
        block = np.kron(_filter_bank_1d(h_cur, h), _filter_bank_1d(w_cur, h))
        idx = np.array([r * W + c for r in range(h_cur) for c in range(w_cur)])
        level[np.ix_(idx, idx)] = block
        A = level @ A
        h_cur, w_cur = h_cur // 2, w_cur // 2
    return A


GRADCHECK_CONFIG = SolverConfig(alpha1=0.5, alpha2=2.0, alpha3=0.5, rho1=2.0, rho2=3.0, rho3=1.5, rho=1.0)


@dataclass
class CheckResult:
    name: str
    max_rel_err: float
    tol: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.max_rel_err) and self.max_rel_err <= self.tol)

    def line(self) -> str:
        return f"{self.name}\t{self.max_rel_err:.3e}\t{'PASS' if self.passed else 'FAIL'}"


def rel_err(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    scale = max(float(np.abs(a).max(initial=0.0)), float(np.abs(b).max(initial=0.0)), 1e-300)
    return float(np.abs(a - b).max(initial=0.0)) / scale


def fd_gradient_errors(fun: Callable, x, grad, rng, samples: int = 50, h0: float = 1e-4) -> float:
    """Largest per-coordinate relative error between ``grad`` and central differences of ``fun``.

    Step ``h0 * max(1, |x_k|)``.  The relative error of coordinate ``k`` is
    ``|g_k - fd_k| / max(|g_k|, |fd_k|, 1e-3 * ||g||_inf)``, the floor keeping
    coordinates with vanishing derivative from dominating through round-off.
    """
    x = np.asarray(x, dtype=np.float64)
    grad = np.asarray(grad, dtype=np.float64).ravel()
    floor = 1e-3 * float(np.abs(grad).max(initial=0.0))
    idx = rng.choice(x.size, size=min(samples, x.size), replace=False)
    worst = 0.0
    for k in idx:
        h = h0 * max(1.0, abs(float(x.flat[k])))
        xp = x.copy()
        xm = x.copy()
        xp.flat[k] += h
        xm.flat[k] -= h
        fd = (fun(xp) - fun(xm)) / (2 * h)
        den = max(abs(grad[k]), abs(fd), floor, 1e-300)
        worst = max(worst, abs(grad[k] - fd) / den)
    return worst


class _FaultyObservation(ObservationOp):
    """Observation operator whose adjoint is deliberately off by 0.1 %."""

    def adjoint(self, r):
        return 1.001 * super().adjoint(r)


def _random_problem(rng, T: int, shape, cfg: SolverConfig):
    h, w = shape[0] // 2, shape[1] // 2
    y = 10.0 * rng.standard_normal((T + 1, h, w))
    weights = rng.uniform(0.5, 1.5, size=(T,) + tuple(shape))
    eps = rng.standard_normal((T,) + tuple(shape))
    d = rng.uniform(-1.5, 1.5, size=(T, 2) + tuple(shape))
    c = 5.0 * rng.standard_normal(tuple(shape))
    model = SequentialModel(y, cfg, weights)
    return model, eps, d, c


def penalty_configurations(model: SequentialModel, eps, d, c, rng) -> dict:
    """Plain p = 2 cost, the augmented quadratics of the known-motion ADMM, and the step-1 variant."""
    cfg = model.cfg
    haar = model.haar
    eps_prev = eps + 0.3 * rng.standard_normal(eps.shape)
    c_prev = c + 0.3 * rng.standard_normal(c.shape)
    aug = [QuadraticTerm("eps", cfg.rho1, rng.standard_normal(eps.shape)),
           QuadraticTerm("c", cfg.rho3, rng.standard_normal(c.shape))]
    step1 = aug + [
        QuadraticTerm("eps", cfg.rho, rng.standard_normal(eps.shape),
                      lambda e: haar.analysis(e - eps_prev), haar.synthesis),
        QuadraticTerm("c", cfg.rho, rng.standard_normal(c.shape), lambda v: v - c_prev),
    ]
    motion = [QuadraticTerm("d", cfg.rho2, rng.standard_normal(motion_grad(d).shape),
                            motion_grad, motion_grad_adjoint)]
    return {
        "plain_p2": model.plain_penalty(2),
        "augmented": StagePenalty(aug + motion),
        "step1_augmented": StagePenalty(step1 + motion),
    }


def _adjoint_checks(rng, shape, model: SequentialModel, cfg: SolverConfig) -> list:
    out = []
    Hd = dense_observation(shape, kernel_taps(cfg.kernel, cfg.sigma))
    obs = model.obs
    X = rng.standard_normal(shape)
    R = rng.standard_normal((shape[0] // 2, shape[1] // 2))
    err = max(rel_err(obs(X).ravel(), Hd @ X.ravel()), rel_err(obs.adjoint(R).ravel(), Hd.T @ R.ravel()),
              abs(np.vdot(obs(X), R) - np.vdot(X, obs.adjoint(R))) / abs(np.vdot(obs(X), R)))
    out.append(CheckResult("adjoint_H", err, 1e-10))
    Gd = dense_motion_grad(shape)
    D = rng.standard_normal((2,) + tuple(shape))
    V = rng.standard_normal(tuple(shape) + (4,))
    err = max(rel_err(motion_grad(D).ravel(), Gd @ D.ravel()),
              rel_err(motion_grad_adjoint(V).ravel(), Gd.T @ V.ravel()))
    out.append(CheckResult("adjoint_G", err, 1e-10))
    for name, op in (("adjoint_D", model.dictionary), ("adjoint_haar", model.haar)):
        A = dense_wavelet(shape, op.family, op.levels)
        err = max(rel_err(op.analysis(X).ravel(), A @ X.ravel()), rel_err(op.synthesis(X).ravel(), A.T @ X.ravel()))
        out.append(CheckResult(name, err, 1e-10))
    err = 0.0
    for _ in range(5):
        d = rng.uniform(-2.0, 2.0, size=(2,) + tuple(shape))
        P = dense_warp(d, shape)
        w = Warp(d, cfg.fd_step)
        Z = rng.standard_normal(shape)
        err = max(err, rel_err(w(prefilter(X)).ravel(), P @ X.ravel()), rel_err(w.adjoint(Z).ravel(), P.T @ Z.ravel()))
    out.append(CheckResult("adjoint_P", err, 1e-10))
    return out


def _prox_checks(rng) -> list:
    worst = 0.0
    for _ in range(200):
        v = 3.0 * rng.standard_normal(6)
        lam = rng.uniform(0.0, 2.0)
        u = prox_l1(v, lam)
        f = lambda z: lam * np.abs(z).sum() + 0.5 * np.sum((z - v) ** 2)
        base = f(u)
        for k in range(v.size):
            for s in (1e-3, -1e-3):
                z = u.copy()
                z[k] += s
                worst = max(worst, base - f(z))
        w = rng.uniform(0.0, 2.0, size=3)
        g = 2.0 * rng.standard_normal((3, 4))
        th = rng.uniform(0.0, 2.0)
        u = group_shrink(g, w, th)
        f = lambda z: th * float(np.sum(w * np.sqrt(np.sum(z * z, axis=-1)))) + 0.5 * np.sum((z - g) ** 2)
        base = f(u)
        for k in range(u.size):
            for s in (1e-3, -1e-3):
                z = u.copy()
                z.flat[k] += s
                worst = max(worst, base - f(z))
    return [CheckResult("prox_optimality", max(worst, 0.0), 1e-12)]


def run_gradcheck(seed: int = 0, cfg: SolverConfig | None = None, shape=(8, 8), T: int = 3,
                  samples: int = 50, fault: str | None = None) -> list:
    """All operator, gradient and prox checks at a small random instance.

    ``fault='adjoint-H'`` swaps in an observation operator with a wrong
    adjoint, which the checks must detect.
    """
    if cfg is None:
        # moderate weights keep every term of the cost on a similar scale, so
        # central differences are not swamped by round-off of one large term
        cfg = GRADCHECK_CONFIG
    cfg = cfg.replace(p=2, levels=cfg.levels if cfg.levels is not None else 1)
    rng = np.random.default_rng(seed)
    model, eps, d, c = _random_problem(rng, T, shape, cfg)
    if fault == "adjoint-H":
        model.obs = _FaultyObservation(model.obs.taps)
    elif fault is not None:
        raise ValueError(f"unknown fault {fault!r}")
    results = _adjoint_checks(rng, shape, model, cfg)
    for name, penalty in penalty_configurations(model, eps, d, c, rng).items():
        _, g = model.evaluate(eps, d, c, penalty)
        blocks = {
            "eps": (eps, g.eps, lambda v: model.evaluate(v, d, c, penalty, blocks="")[0]),
            "d": (d, g.d, lambda v: model.evaluate(eps, v, c, penalty, blocks="")[0]),
            "c": (c, g.c, lambda v: model.evaluate(eps, d, v, penalty, blocks="")[0]),
        }
        for block, (x0, gx, fun) in blocks.items():
            err = fd_gradient_errors(fun, x0, gx, rng, samples)
            results.append(CheckResult(f"grad_{name}_{block}", err, 1e-5))
    results.extend(_prox_checks(rng))
    return results



def run_kalman_check(seed: int = 0, cfg: SolverConfig | None = None, shape=(4, 4), T: int = 3) -> list:
    """Compare the smoother posterior mean with the L-BFGS minimizer of the p = 2 cost.

    Both routes see the same random motion and observations.  The sequence
    error is normalized by the largest smoothed pixel magnitude; the gradient
    at the smoother output by ``max(1, ||gradient at zero||_inf)``.
    """
    from .kalman import build_dense_model, smooth_map
    from .lbfgs import LbfgsParams, lbfgs_minimize

    cfg = (cfg or SolverConfig()).replace(p=2)
    rng = np.random.default_rng(seed)
    shape = tuple(shape)
    d = rng.uniform(-1.0, 1.0, size=(T, 2) + shape)
    y = 10.0 * rng.standard_normal((T + 1, shape[0] // 2, shape[1] // 2))
    model = SequentialModel(y, cfg)
    penalty = model.plain_penalty(2)
    x_kal = smooth_map(y, build_dense_model(d, cfg)).frames

    n = int(np.prod(shape))

    def fun(v):
        e, c = v[: T * n].reshape((T,) + shape), v[T * n:].reshape(shape)
        val, g = model.evaluate(e, d, c, penalty, blocks="ec")
        return val, np.concatenate([g.eps.ravel(), g.c.ravel()])

    res = lbfgs_minimize(fun, np.zeros(n * (T + 1)), LbfgsParams(max_iters=5000, gtol=1e-13))
    e_opt, c_opt = res.x[: T * n].reshape((T,) + shape), res.x[T * n:].reshape(shape)
    x_opt = model.synthesize(e_opt, d, c_opt).x
    seq_err = float(np.abs(x_opt - x_kal).max() / max(np.abs(x_kal).max(), 1e-300))

    # the smoother output expressed in the (eps, c) parametrization
    c_kal = model.dictionary.analysis(x_kal[T])
    e_kal = np.stack([x_kal[t - 1] - Warp(d[t - 1], cfg.fd_step)(prefilter(x_kal[t])) for t in range(1, T + 1)])
    _, g = model.evaluate(e_kal, d, c_kal, penalty, blocks="ec")
    _, g0 = model.evaluate(np.zeros_like(e_kal), d, np.zeros_like(c_kal), penalty, blocks="ec")
    scale = max(1.0, float(np.abs(g0.eps).max()), float(np.abs(g0.c).max()))
    grad_err = max(float(np.abs(g.eps).max()), float(np.abs(g.c).max())) / scale
    return [CheckResult("kalman_vs_lbfgs", seq_err, 1e-6), CheckResult("kalman_stationarity", grad_err, 1e-6)]


def dense_sequence_matrix(d, cfg: SolverConfig) -> np.ndarray:
    """Matrix mapping ``[eps_1 .. eps_T, c]`` (flattened) to the stacked observations ``H x_t``.

    Built from the closed-form dense warp, blur and wavelet matrices by
    unrolling the backward recursion.
    """
    d = np.asarray(d, dtype=np.float64)
    T, shape = d.shape[0], d.shape[-2:]
    n = shape[0] * shape[1]
    Hm = dense_observation(shape, kernel_taps(cfg.kernel, cfg.sigma))
    Dm = dense_wavelet(shape, cfg.dictionary, cfg.levels).T
    # state_maps[t] expresses x_t in terms of the unknowns
    state = np.zeros((n, n * (T + 1)))
    state[:, T * n:] = Dm
    maps = [None] * (T + 1)
    maps[T] = state
    for t in range(T, 0, -1):
        prev = dense_warp(d[t - 1], shape) @ maps[t]
        prev[:, (t - 1) * n:t * n] += np.eye(n)
        maps[t - 1] = prev
    return np.vstack([Hm @ m for m in maps])


def proximal_gradient_reference(y, d, cfg: SolverConfig, iters: int = 100_000):
    """Accelerated proximal gradient (FISTA) on the known-motion ``p = 1`` cost.

    Minimizes ``||A z - y||^2 + alpha1 ||eps||_1 + alpha3 ||c||_1`` over
    ``z = [eps, c]``.  Returns ``(eps, c, value)``; ``value`` omits the
    motion regularizer, which is constant here.
    """
    y = np.asarray(y, dtype=np.float64)
    d = np.asarray(d, dtype=np.float64)
    T, shape = d.shape[0], d.shape[-2:]
    n = shape[0] * shape[1]
    A = dense_sequence_matrix(d, cfg)
    b = y.reshape(-1)
    AtA, Atb = A.T @ A, A.T @ b
    step = 1.0 / (2.0 * np.linalg.eigvalsh(AtA)[-1])
    lam = np.concatenate([np.full(T * n, cfg.alpha1), np.full(n, cfg.alpha3)]) * step

    def value(z):
        r = A @ z - b
        return float(r @ r + cfg.alpha1 * np.abs(z[:T * n]).sum() + cfg.alpha3 * np.abs(z[T * n:]).sum())

    z = np.zeros(A.shape[1])
    v, tk = z.copy(), 1.0
    for _ in range(iters):
        grad = 2.0 * (AtA @ v - Atb)
        u = v - step * grad
        z_new = np.sign(u) * np.maximum(np.abs(u) - lam, 0.0)
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * tk * tk))
        v = z_new + ((tk - 1.0) / t_new) * (z_new - z)
        z, tk = z_new, t_new
    return z[:T * n].reshape((T,) + tuple(shape)), z[T * n:].reshape(shape), value(z)
