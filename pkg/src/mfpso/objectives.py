"""Benchmark objective functions and their domain transforms.

All objectives evaluate batches: ``x`` may have shape ``(d,)`` or ``(..., d)``
and the result drops the last axis.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "Objective",
    "EvalCounter",
    "make_objective",
    "rescale_to_reference",
    "shift_minimum",
    "with_random_coeffs",
    "FUNCTION_NAMES",
]


def _ackley(x, coeffs=None):
    d = x.shape[-1]
    r = np.sqrt(np.sum(x * x, axis=-1) / d)
    c = np.sum(np.cos(2.0 * np.pi * x), axis=-1) / d
    return -20.0 * np.exp(-0.2 * r) - np.exp(c) + 20.0 + np.e


def _griewank(x, coeffs=None):
    # divisor is i, not sqrt(i)
    idx = np.arange(1, x.shape[-1] + 1, dtype=float)
    return 1.0 + np.sum(x * x, axis=-1) / 4000.0 - np.prod(np.cos(x / idx), axis=-1)


def _rastrigin(x, coeffs=None):
    d = x.shape[-1]
    return 10.0 * d + np.sum(x * x - 10.0 * np.cos(2.0 * np.pi * x), axis=-1)


def _rosenbrock(x, coeffs=None):
    a = x[..., :-1]
    b = x[..., 1:]
    return np.sum(100.0 * (b - a * a) ** 2 + (1.0 - a) ** 2, axis=-1)


def _salomon(x, coeffs=None):
    r = np.sqrt(np.sum(x * x, axis=-1))
    return 1.0 - np.cos(2.0 * np.pi * r) + 0.1 * r


def _schwefel220(x, coeffs=None):
    return np.sum(np.abs(x), axis=-1)


def _xsy_random(x, coeffs):
    powers = np.arange(1, x.shape[-1] + 1, dtype=float)
    return np.sum(coeffs * np.abs(x) ** powers, axis=-1)


def _xsy4(x, coeffs=None):
    s = np.sum(np.sin(x) ** 2, axis=-1)
    g = np.exp(-np.sum(x * x, axis=-1))
    h = np.exp(-np.sum(np.sin(np.sqrt(np.abs(x))) ** 2, axis=-1))
    return (s - g) * h


# name -> (function, classical domain, minimizer coordinate, minimum value)
_TABLE: dict[str, tuple[Callable, tuple[float, float], float, float]] = {
    "ackley": (_ackley, (-32.0, 32.0), 0.0, 0.0),
    "griewank": (_griewank, (-600.0, 600.0), 0.0, 0.0),
    "rastrigin": (_rastrigin, (-5.12, 5.12), 0.0, 0.0),
    "rosenbrock": (_rosenbrock, (-5.0, 10.0), 1.0, 0.0),
    "salomon": (_salomon, (-100.0, 100.0), 0.0, 0.0),
    "schwefel220": (_schwefel220, (-100.0, 100.0), 0.0, 0.0),
    "xsy_random": (_xsy_random, (-5.0, 5.0), 0.0, 0.0),
    "xsy4": (_xsy4, (-10.0, 10.0), 0.0, -1.0),
}

FUNCTION_NAMES = tuple(_TABLE)

_ALIASES = {
    "schwefel2.20": "schwefel220",
    "schwefel_2_20": "schwefel220",
    "xsyrandom": "xsy_random",
    "xsy-random": "xsy_random",
    "xsy_4": "xsy4",
}


@dataclass(frozen=True, eq=False)
class Objective:
    """A benchmark function together with its domain and known minimizer.

    Evaluation computes ``base(center + scale * (x - shift)) + offset``; the
    affine part is the identity unless the objective has been rescaled to the
    reference cube.
    """

    name: str
    dim: int
    lo: np.ndarray
    hi: np.ndarray
    minimizer: np.ndarray
    min_value: float
    shift: np.ndarray
    rescaled: bool = False
    random_coeffs: np.ndarray | None = None
    center: np.ndarray | None = None
    scale: np.ndarray | None = None
    offset: float = 0.0
    _func: Callable = field(default=_ackley, repr=False)

    def __post_init__(self):
        if np.any(self.lo >= self.hi):
            raise ValueError(f"{self.name}: empty domain (lo >= hi)")
        for arr in (self.lo, self.hi, self.minimizer, self.shift):
            arr.setflags(write=False)

    def __call__(self, x):
        return self.evaluate(x)

    def evaluate(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1:] != (self.dim,):
            raise ValueError(
                f"{self.name}: expected points of dimension {self.dim}, got shape {x.shape}"
            )
        z = x - self.shift
        if self.rescaled:
            z = self.center + self.scale * z
        return self._func(z, self.random_coeffs) + self.offset

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lo) and np.all(x <= self.hi))


class EvalCounter:
    """Counts objective evaluations (one per point)."""

    def __init__(self):
        self.count = 0

    def __call__(self, objective: Objective, x):
        x = np.asarray(x, dtype=float)
        self.count += int(np.prod(x.shape[:-1], dtype=np.int64))
        return objective.evaluate(x)


def make_objective(name, dim, domain=None, rng=None, random_coeffs=None) -> Objective:
    """Build a table objective on its classical domain (or ``domain`` if given).

    ``xsy_random`` needs its coefficients: pass ``random_coeffs`` directly or a
    generator ``rng`` to draw them from U(0, 1).
    """
    key = _ALIASES.get(name.lower(), name.lower())
    if key not in _TABLE:
        raise ValueError(f"unknown objective {name!r}; choose from {', '.join(FUNCTION_NAMES)}")
    if dim < 1 or (key == "rosenbrock" and dim < 2):
        raise ValueError(f"{key}: invalid dimension {dim}")
    func, (lo, hi), xstar, fstar = _TABLE[key]
    if domain is not None:
        lo, hi = domain
    coeffs = None
    if key == "xsy_random":
        if random_coeffs is None:
            rng = rng if rng is not None else np.random.default_rng(0)
            random_coeffs = rng.uniform(0.0, 1.0, size=dim)
        coeffs = np.array(random_coeffs, dtype=float)
        if coeffs.shape != (dim,):
            raise ValueError("random_coeffs must have length dim")
        coeffs.setflags(write=False)
    return Objective(
        name=key,
        dim=dim,
        lo=np.full(dim, float(lo)),
        hi=np.full(dim, float(hi)),
        minimizer=np.full(dim, float(xstar)),
        min_value=float(fstar),
        shift=np.zeros(dim),
        random_coeffs=coeffs,
        _func=func,
    )


def with_random_coeffs(obj: Objective, rng) -> Objective:
    """Redraw the XSY-random coefficients; other objectives are returned unchanged."""
    if obj.name != "xsy_random":
        return obj
    coeffs = rng.uniform(0.0, 1.0, size=obj.dim)
    coeffs.setflags(write=False)
    return dataclasses.replace(obj, random_coeffs=coeffs)


def rescale_to_reference(obj: Objective) -> Objective:
    """Map the objective's domain onto [-1, 1]^d and translate its minimum to 0."""
    if obj.rescaled:
        raise ValueError(f"{obj.name} is already rescaled")
    center = 0.5 * (obj.lo + obj.hi)
    scale = 0.5 * (obj.hi - obj.lo)
    # minimizer of the unshifted base in reference coordinates, then re-apply the shift
    base_min = obj.minimizer - obj.shift
    shift = obj.shift / scale
    minimizer = (base_min - center) / scale + shift
    return dataclasses.replace(
        obj,
        lo=-np.ones(obj.dim),
        hi=np.ones(obj.dim),
        minimizer=minimizer,
        min_value=0.0,
        shift=shift,
        rescaled=True,
        center=center,
        scale=scale,
        offset=obj.offset - obj.min_value,
    )


def shift_minimum(obj: Objective, x_star) -> Objective:
    """Translate the objective so that its minimizer sits at ``x_star``."""
    x_star = np.broadcast_to(np.asarray(x_star, dtype=float), (obj.dim,)).copy()
    if not obj.contains(x_star):
        raise ValueError(f"shift target {x_star} lies outside the domain of {obj.name}")
    return dataclasses.replace(
        obj,
        minimizer=x_star,
        shift=obj.shift + (x_star - obj.minimizer),
    )
