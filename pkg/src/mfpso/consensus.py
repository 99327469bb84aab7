"""Regularized global best (softmin consensus) and local-best switches.

Exponential weights are shifted by the population minimum before
exponentiation, so the largest weight is exactly one and any ``alpha`` is
safe, including ``alpha = inf`` which returns the arg-min point.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "global_best",
    "local_global_best",
    "argmin_point",
    "softmin_weights",
    "smooth_switch",
    "hard_switch",
    "laplace_value",
]


def _check(points, values, weights=None):
    points = np.asarray(points, dtype=float)
    values = np.asarray(values, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    if points.shape[0] == 0 or values.size == 0:
        raise ValueError("consensus of an empty population")
    if values.shape != points.shape[:1]:
        raise ValueError(f"got {points.shape[0]} points but {values.size} values")
    if np.isnan(values).any():
        raise ValueError("NaN objective value in consensus")
    if weights is not None:
        weights = np.asarray(weights, dtype=float)
        if weights.shape != values.shape:
            raise ValueError("weights must match values")
        if np.any(weights < 0) or not np.any(weights > 0):
            raise ValueError("weights must be non-negative with positive total")
    return points, values, weights


def softmin_weights(values, alpha, weights=None):
    """Return ``w_i * exp(-alpha (F_i - F_min))``; the reference ``F_min`` is
    taken over entries with positive ``w_i``."""
    values = np.asarray(values, dtype=float)
    if weights is None:
        fmin = values.min()
        if np.isinf(alpha):
            return (values == fmin).astype(float)
        return np.exp(-alpha * (values - fmin))
    live = weights > 0
    fmin = values[live].min()
    if np.isinf(alpha):
        return np.where(live & (values == fmin), weights, 0.0)
    with np.errstate(invalid="ignore"):
        w = np.where(live, weights * np.exp(-alpha * (values - fmin)), 0.0)
    return w


def argmin_point(points, values):
    """Arg-min of ``values`` with ties broken towards the lowest index."""
    points, values, _ = _check(points, values)
    return points[int(np.argmin(values))].copy()


def global_best(points, values, alpha, weights=None):
    """Softmin-weighted average of ``points``.

    ``weights`` optionally gives a non-uniform reference measure (e.g. grid
    masses of a density); the uniform empirical measure is the default.
    """
    points, values, weights = _check(points, values, weights)
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    if np.isinf(alpha) and weights is None:
        return points[int(np.argmin(values))].copy()
    w = softmin_weights(values, alpha, weights)
    # average the offsets from the heaviest point: exact when all points coincide
    ref = points[int(np.argmax(w))]
    return ref + (w @ (points - ref)) / w.sum()


def local_global_best(local_bests, values, alpha, weights=None):
    """Consensus over the local-best memory; same formula as :func:`global_best`."""
    return global_best(local_bests, values, alpha, weights)


def smooth_switch(fx, fy, beta):
    """Sigmoid local-best switch ``1 + tanh(beta (fy - fx))`` in (0, 2)."""
    if np.isinf(beta):
        return hard_switch(fx, fy)
    return 1.0 + np.tanh(beta * (np.asarray(fy, dtype=float) - np.asarray(fx, dtype=float)))


def hard_switch(fx, fy):
    """Classic local-best switch ``1 + sign(fy - fx)`` in {0, 1, 2}."""
    return 1.0 + np.sign(np.asarray(fy, dtype=float) - np.asarray(fx, dtype=float))


def laplace_value(values, alpha, weights=None):
    """``-(1/alpha) log(mean exp(-alpha F))``, computed with the min-shift."""
    values = np.asarray(values, dtype=float).ravel()
    if values.size == 0:
        raise ValueError("empty values")
    if not np.all(np.isfinite(values)):
        raise ValueError("values must be finite")
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    if weights is None:
        weights = np.full(values.size, 1.0 / values.size)
    else:
        weights = np.asarray(weights, dtype=float).ravel()
        weights = weights / weights.sum()
    fmin = values[weights > 0].min()
    if np.isinf(alpha):
        return float(fmin)
    s = np.sum(weights * np.exp(-alpha * (values - fmin)))
    return float(fmin - np.log(s) / alpha)
