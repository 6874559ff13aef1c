"""Closed-form proximal maps and the motion regularizer."""

from __future__ import annotations

import numpy as np

__all__ = ["soft", "prox_l1", "group_shrink", "eval_R"]


def soft(a, lam):
    """Scalar (or elementwise) soft-thresholding."""
    if lam < 0:
        raise ValueError("threshold must be non-negative")
    a = np.asarray(a, dtype=np.float64)
    out = np.sign(a) * np.maximum(np.abs(a) - lam, 0.0)
    return out if out.ndim else float(out)


def prox_l1(v, lam) -> np.ndarray:
    """argmin_u ||u||_1 + ||u - v||^2 / (2 lam)."""
    if lam < 0:
        raise ValueError("threshold must be non-negative")
    v = np.asarray(v, dtype=np.float64)
    return np.sign(v) * np.maximum(np.abs(v) - lam, 0.0)


def group_shrink(v, w, theta) -> np.ndarray:
    """Block soft-thresholding of 4-vectors (last axis) with per-group threshold ``theta * w``.

    Solves argmin_u w ||u||_2 + ||u - v||^2 / (2 theta) for every group.
    """
    w = np.asarray(w, dtype=np.float64)
    if theta < 0 or np.any(w < 0):
        raise ValueError("weights and threshold must be non-negative")
    v = np.asarray(v, dtype=np.float64)
    tau = np.sqrt(np.sum(v * v, axis=-1))
    thr = theta * w
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(tau > thr, (tau - thr) / np.where(tau > 0, tau, 1.0), 0.0)
    return v * scale[..., None]


def eval_R(gd, w=None, p: int = 1) -> float:
    """Weighted group penalty sum_i w(i) (sum_{j in S_i} gd(j)^2)^(p/2).

    ``gd`` has groups on its last axis (shape (..., H, W, 4)); ``w`` broadcasts
    against the group grid and defaults to uniform weights.
    """
    if p not in (1, 2):
        raise ValueError("p must be 1 or 2")
    gd = np.asarray(gd, dtype=np.float64)
    sq = np.sum(gd * gd, axis=-1)
    per_group = np.sqrt(sq) if p == 1 else sq
    if w is not None:
        per_group = per_group * np.asarray(w, dtype=np.float64)
    return float(per_group.sum())
