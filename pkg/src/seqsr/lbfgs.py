"""Limited-memory BFGS with a strong-Wolfe line search.

Used as the smooth inner solver of every ADMM instance.  The objective is a
callable returning ``(value, gradient)`` for a flat float64 vector.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = ["LbfgsParams", "LbfgsResult", "LbfgsError", "lbfgs_minimize", "strong_wolfe"]

log = logging.getLogger(__name__)

Objective = Callable[[np.ndarray], "tuple[float, np.ndarray]"]


class LbfgsError(RuntimeError):
    """The objective returned a non-finite value or gradient."""


@dataclass(frozen=True)
class LbfgsParams:
    memory: int = 10
    max_iters: int = 50
    c1: float = 1e-4
    c2: float = 0.9
    gtol: float = 1e-6
    max_linesearch: int = 30

    def __post_init__(self):
        if not 0 < self.c1 < self.c2 < 1:
            raise ValueError("need 0 < c1 < c2 < 1")
        if self.memory < 1:
            raise ValueError("memory must be >= 1")


@dataclass
class LbfgsResult:
    x: np.ndarray
    fun: float
    grad: np.ndarray
    iterations: int
    nfev: int
    converged: bool
    trace: list = field(default_factory=list)


def _evaluate(fun: Objective, x: np.ndarray):
    f, g = fun(x)
    f = float(f)
    g = np.asarray(g, dtype=np.float64)
    if not np.isfinite(f) or not np.all(np.isfinite(g)):
        raise LbfgsError(f"objective returned non-finite output (f={f})")
    return f, g


def _cubic_min(a, fa, da, b, fb, db):
    """Minimizer of the cubic interpolating (a, fa, da) and (b, fb, db), or None."""
    d1 = da + db - 3 * (fa - fb) / (a - b)
    rad = d1 * d1 - da * db
    if rad < 0:
        return None
    d2 = np.sign(b - a) * np.sqrt(rad)
    denom = db - da + 2 * d2
    if denom == 0:
        return None
    return b - (b - a) * (db + d2 - d1) / denom


def strong_wolfe(phi, f0: float, d0: float, alpha: float, c1: float, c2: float, maxiter: int = 30):
    """Step length satisfying the strong Wolfe conditions.

    ``phi(alpha)`` returns ``(f, g, dphi)``.  Returns ``((alpha, f, g), failed)``;
    when no Wolfe step is found ``failed`` is True and the best decreasing
    trial is returned instead (``None`` if nothing decreased).
    """
    best = None
    a_prev, f_prev, d_prev = 0.0, f0, d0
    # approximate Wolfe test (Hager-Zhang) for when differences of f are lost
    # in round-off near a minimizer: rely on the directional derivative instead
    f_slack = f0 + 1e-12 * abs(f0)

    def approx_ok(f, d):
        return f <= f_slack and c2 * d0 <= d <= (2 * c1 - 1) * d0

    def flat(f):
        return abs(f - f0) <= 1e-12 * abs(f0)

    def zoom(lo, f_lo, d_lo, hi, f_hi, d_hi, budget):
        nonlocal best
        for _ in range(budget):
            a = _cubic_min(lo, f_lo, d_lo, hi, f_hi, d_hi)
            left, right = min(lo, hi), max(lo, hi)
            margin = 0.1 * (right - left)
            if a is None or not (left + margin <= a <= right - margin):
                a = 0.5 * (lo + hi)
            f, g, d = phi(a)
            if f < f0 and (best is None or f < best[1]):
                best = (a, f, g)
            if approx_ok(f, d):
                return a, f, g
            if flat(f):
                # values carry no information; bracket on the derivative sign
                if (d >= 0) == (hi > lo):
                    hi, f_hi, d_hi = a, f, d
                else:
                    lo, f_lo, d_lo = a, f, d
            elif f > f0 + c1 * a * d0 or f >= f_lo:
                hi, f_hi, d_hi = a, f, d
            else:
                if abs(d) <= -c2 * d0:
                    return a, f, g
                if d * (hi - lo) >= 0:
                    hi, f_hi, d_hi = lo, f_lo, d_lo
                lo, f_lo, d_lo = a, f, d
            if abs(hi - lo) < 1e-16 * max(1.0, abs(lo)):
                break
        return None

    for i in range(maxiter):
        f, g, d = phi(alpha)
        if f < f0 and (best is None or f < best[1]):
            best = (alpha, f, g)
        if approx_ok(f, d):
            return (alpha, f, g), False
        if flat(f) and d < 0:
            a_prev, f_prev, d_prev = alpha, f, d
            alpha *= 2.0
            continue
        if flat(f):
            found = zoom(a_prev, f_prev, d_prev, alpha, f, d, maxiter)
            return (found, False) if found else (best, True)
        if f > f0 + c1 * alpha * d0 or (i > 0 and f >= f_prev):
            found = zoom(a_prev, f_prev, d_prev, alpha, f, d, maxiter)
            return (found, False) if found else (best, True)
        if abs(d) <= -c2 * d0:
            return (alpha, f, g), False
        if d >= 0:
            found = zoom(alpha, f, d, a_prev, f_prev, d_prev, maxiter)
            return (found, False) if found else (best, True)
        a_prev, f_prev, d_prev = alpha, f, d
        alpha *= 2.0
    return best, True


def lbfgs_minimize(fun: Objective, x0, params: LbfgsParams | None = None) -> LbfgsResult:
    """Minimize ``fun`` from ``x0``.

    Stops when ``||g||_inf <= gtol * max(1, ||g0||_inf)``, after ``max_iters``
    iterations, or when the line search cannot decrease the objective any
    further.  Curvature pairs with ``s.y <= 0`` are skipped.
    """
    params = params or LbfgsParams()
    x = np.array(x0, dtype=np.float64).ravel()
    f, g = _evaluate(fun, x)
    nfev = 1
    trace = [f]
    tol = params.gtol * max(1.0, float(np.abs(g).max(initial=0.0)))
    pairs: deque = deque(maxlen=params.memory)
    converged = float(np.abs(g).max(initial=0.0)) <= tol
    it = 0
    while not converged and it < params.max_iters:
        # two-loop recursion
        q = g.copy()
        alphas = []
        for s, y, rho in reversed(pairs):
            a = rho * np.dot(s, q)
            alphas.append(a)
            q -= a * y
        if pairs:
            s, y, _ = pairs[-1]
            q *= np.dot(s, y) / np.dot(y, y)
        for (s, y, rho), a in zip(pairs, reversed(alphas)):
            b = rho * np.dot(y, q)
            q += (a - b) * s
        direction = -q
        d0 = float(np.dot(g, direction))
        if d0 >= 0:
            pairs.clear()
            direction = -g
            d0 = float(-np.dot(g, g))
        step = 1.0 if pairs else min(1.0, 1.0 / max(np.sqrt(-d0), 1e-300))

        def phi(a, _x=x, _p=direction):
            nonlocal nfev
            fa, ga = _evaluate(fun, _x + a * _p)
            nfev += 1
            return fa, ga, float(np.dot(ga, _p))

        accepted, _ = strong_wolfe(phi, f, d0, step, params.c1, params.c2, params.max_linesearch)
        if accepted is None:
            log.debug("line search made no progress at iteration %d", it)
            break
        a, f_new, g_new = accepted
        s = a * direction
        y = g_new - g
        sy = float(np.dot(s, y))
        if sy > 1e-12 * float(np.dot(y, y)) and sy > 0:
            pairs.append((s, y, 1.0 / sy))
        x = x + s
        f, g = f_new, g_new
        trace.append(f)
        it += 1
        converged = float(np.abs(g).max()) <= tol
    return LbfgsResult(x=x, fun=f, grad=g, iterations=it, nfev=nfev, converged=converged, trace=trace)
