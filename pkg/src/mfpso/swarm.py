"""Particle swarm time-steppers.

Modes
-----
``sdpso_nomem``
    Stochastic-differential PSO without memory; consensus over positions.
``sdpso_mem``
    Stochastic-differential PSO with a relaxed local-best memory; consensus
    over the local bests.
``cbo_mem``
    Zero-inertia (consensus-based) scheme with local-best memory; no velocity.
``classic_pso`` / ``classic_pso_inertia``
    The original discrete PSO with hard local/global best rules.

All steppers are pure: they return a new :class:`Swarm`. Noise comes from an
object with ``theta(shape)`` (unit-variance draws) and ``uniform(shape)``
(U[0, 1) draws) methods, normally a :class:`RngStream`.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .consensus import argmin_point, global_best, smooth_switch
from .objectives import EvalCounter, Objective

__all__ = [
    "MODES",
    "SolverConfig",
    "Stopping",
    "Swarm",
    "RngStream",
    "RunResult",
    "ConfigError",
    "DivergenceError",
    "init",
    "step",
    "step_no_memory",
    "step_with_memory",
    "step_cbo",
    "step_classic",
    "run",
    "consensus_of",
]

MODES = ("sdpso_nomem", "sdpso_mem", "cbo_mem", "classic_pso", "classic_pso_inertia")
MEMORY_MODES = ("sdpso_mem", "cbo_mem", "classic_pso", "classic_pso_inertia")


class ConfigError(ValueError):
    pass


class DivergenceError(FloatingPointError):
    def __init__(self, step_index, message="non-finite particle state"):
        super().__init__(f"{message} at step {step_index}")
        self.step_index = step_index


@dataclass(frozen=True)
class SolverConfig:
    """Dynamical and regularization parameters of one solver.

    ``lam``/``sigma`` drive the memoryless scheme; ``lam1``/``sigma1`` (local
    best) and ``lam2``/``sigma2`` (global best) drive the memory schemes.
    ``gamma`` defaults to ``1 - m``.
    """

    mode: str = "sdpso_nomem"
    m: float = 0.0
    gamma: Optional[float] = None
    lam: float = 1.0
    sigma: float = 1.0 / math.sqrt(3.0)
    lam1: float = 0.0
    sigma1: float = 0.0
    lam2: float = 1.0
    sigma2: float = 1.0 / math.sqrt(3.0)
    nu: float = 50.0
    alpha: float = 5.0e4
    beta: float = 3.0e3
    dt: float = 0.01
    noise: str = "gaussian"
    c1: float = 2.0
    c2: float = 2.0
    clamp: bool = False

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; choose from {', '.join(MODES)}")
        if self.noise not in ("gaussian", "uniform"):
            raise ConfigError(f"unknown noise {self.noise!r}")
        if not self.dt > 0:
            raise ConfigError("dt must be positive")
        if self.m < 0:
            raise ConfigError("inertia m must be non-negative")
        if self.gamma is None:
            object.__setattr__(self, "gamma", 1.0 - self.m)
        if self.gamma < 0:
            raise ConfigError("friction gamma must be non-negative")
        if not self.m + self.gamma * self.dt > 0:
            raise ConfigError("m + gamma*dt must be positive")
        for name in ("sigma", "sigma1", "sigma2", "alpha", "beta", "nu"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")

    def replace(self, **changes) -> "SolverConfig":
        if "m" in changes and "gamma" not in changes:
            changes["gamma"] = None
        return dataclasses.replace(self, **changes)

    @classmethod
    def from_classic(cls, c1, c2, w, **kw) -> "SolverConfig":
        """Memory-scheme parameters that reproduce classic PSO with inertia ``w``
        (dt = 1, nu = 1/2, uniform noise, hard switches)."""
        s3 = math.sqrt(3.0)
        base = dict(
            mode="sdpso_mem", m=w, gamma=1.0 - w, lam1=c1 / 2, lam2=c2 / 2,
            sigma1=c1 / (2 * s3), sigma2=c2 / (2 * s3), dt=1.0, nu=0.5,
            alpha=math.inf, beta=math.inf, noise="uniform", c1=c1, c2=c2,
        )
        base.update(kw)
        return cls(**base)


@dataclass(frozen=True)
class Stopping:
    delta_stall: float = 1e-4
    n_stall: int = 200
    n_max: int = 10_000

    def __post_init__(self):
        if not self.delta_stall > 0 or self.n_stall < 1 or self.n_max < 1:
            raise ConfigError("stopping thresholds must be positive")


class RngStream:
    """Seeded source of the per-particle, per-dimension, per-step draws.

    ``theta`` returns unit-variance noise: standard normal, or
    ``sqrt(3) * (2u - 1)`` for ``kind="uniform"``. Both kinds consume exactly
    one uniform/normal draw per entry, so two streams with the same seed give
    matched tapes.
    """

    def __init__(self, seed=None, kind="gaussian"):
        if kind not in ("gaussian", "uniform"):
            raise ValueError(f"unknown noise kind {kind!r}")
        self.seed = seed
        self.kind = kind
        self.generator = np.random.default_rng(seed)

    def theta(self, shape):
        if self.kind == "gaussian":
            return self.generator.standard_normal(shape)
        return math.sqrt(3.0) * (2.0 * self.generator.random(shape) - 1.0)

    def uniform(self, shape):
        return self.generator.random(shape)


@dataclass
class Swarm:
    """Particle state. ``FX``/``FP`` cache objective values at ``X``/``P``;
    ``consensus`` is the consensus point of the current state."""

    X: np.ndarray
    V: np.ndarray
    P: Optional[np.ndarray] = None
    FX: Optional[np.ndarray] = None
    FP: Optional[np.ndarray] = None
    consensus: Optional[np.ndarray] = None
    step_index: int = 0

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def dim(self):
        return self.X.shape[1]

    def copy(self) -> "Swarm":
        def c(a):
            return None if a is None else a.copy()

        return Swarm(c(self.X), c(self.V), c(self.P), c(self.FX), c(self.FP),
                     c(self.consensus), self.step_index)


def _evaluator(counter):
    if counter is None:
        return lambda obj, x: obj.evaluate(x)
    return counter


def consensus_of(swarm: Swarm, config: SolverConfig):
    """Consensus point of the current state for the configured mode."""
    if config.mode == "sdpso_nomem":
        return global_best(swarm.X, swarm.FX, config.alpha)
    if config.mode.startswith("classic"):
        return argmin_point(swarm.P, swarm.FP)
    return global_best(swarm.P, swarm.FP, config.alpha)


def init(objective: Objective, config: SolverConfig, n_particles, seed=None,
         init_box=None, velocity_box=None, rng=None, counter=None) -> Swarm:
    """Uniform positions in ``init_box``; zero velocities unless ``velocity_box``
    is given (then uniform there). Memory modes start with ``P = X``."""
    if n_particles < 1:
        raise ConfigError("need at least one particle")
    d = objective.dim
    if init_box is None:
        lo, hi = objective.lo, objective.hi
    else:
        lo, hi = init_box
    lo = np.broadcast_to(np.asarray(lo, dtype=float), (d,))
    hi = np.broadcast_to(np.asarray(hi, dtype=float), (d,))
    if np.any(lo > hi):
        raise ConfigError("empty initialization box")
    if np.any(lo < objective.lo) or np.any(hi > objective.hi):
        raise ConfigError("initialization box exceeds the objective domain")
    rng = rng if rng is not None else RngStream(seed, config.noise)
    gen = rng.generator
    X = lo + (hi - lo) * gen.random((n_particles, d))
    if velocity_box is None:
        V = np.zeros_like(X)
    else:
        vlo, vhi = velocity_box
        V = vlo + (vhi - vlo) * gen.random((n_particles, d))
    f = _evaluator(counter)
    FX = f(objective, X)
    swarm = Swarm(X=X, V=V, FX=FX)
    if config.mode in MEMORY_MODES:
        swarm.P = X.copy()
        swarm.FP = FX.copy()
    swarm.consensus = consensus_of(swarm, config)
    return swarm


def _check_finite(*arrays, step_index):
    for a in arrays:
        if a is not None and not np.all(np.isfinite(a)):
            raise DivergenceError(step_index)


def _kinetic_update(X, V, drift, noise, m, gamma, dt):
    """Semi-implicit velocity update followed by the position update.

    ``drift`` and ``noise`` are the unscaled force terms (e.g. ``lam (Q - X)``
    and ``sigma D(Q - X) theta``). At ``m = 0`` this is the first-order
    consensus step with no velocity memory.
    """
    sdt = math.sqrt(dt)
    if m == 0:
        disp = (dt * drift + sdt * noise) / gamma
        return disp / dt, X + disp
    V_new = (m * V + dt * drift + sdt * noise) / (m + gamma * dt)
    return V_new, X + dt * V_new


def step_no_memory(swarm: Swarm, objective: Objective, config: SolverConfig, rng,
                   counter=None) -> Swarm:
    f = _evaluator(counter)
    X = swarm.X
    FX = swarm.FX if swarm.FX is not None else f(objective, X)
    Q = global_best(X, FX, config.alpha)
    diff = Q - X
    theta = rng.theta(X.shape)
    V_new, X_new = _kinetic_update(X, swarm.V, config.lam * diff,
                                   config.sigma * diff * theta,
                                   config.m, config.gamma, config.dt)
    n = swarm.step_index + 1
    _check_finite(X_new, V_new, step_index=n)
    FX_new = f(objective, X_new)
    _check_finite(FX_new, step_index=n)
    return Swarm(X=X_new, V=V_new, FX=FX_new,
                 consensus=global_best(X_new, FX_new, config.alpha), step_index=n)


def _update_memory(P, FP, X_new, FX_new, objective, config, f):
    S = smooth_switch(FX_new, FP, config.beta)
    rate = config.nu * config.dt * S
    P_new = P + rate[:, None] * (X_new - P)
    FP_new = FP.copy()
    moved = S != 0
    if moved.any():
        FP_new[moved] = f(objective, P_new[moved])
    return P_new, FP_new


def step_with_memory(swarm: Swarm, objective: Objective, config: SolverConfig, rng,
                     counter=None) -> Swarm:
    f = _evaluator(counter)
    X, P, FP = swarm.X, swarm.P, swarm.FP
    G = global_best(P, FP, config.alpha)
    dp = P - X
    dg = G - X
    theta1 = rng.theta(X.shape)
    theta2 = rng.theta(X.shape)
    drift = config.lam1 * dp + config.lam2 * dg
    noise = config.sigma1 * dp * theta1 + config.sigma2 * dg * theta2
    V_new, X_new = _kinetic_update(X, swarm.V, drift, noise, config.m, config.gamma, config.dt)
    n = swarm.step_index + 1
    _check_finite(X_new, V_new, step_index=n)
    FX_new = f(objective, X_new)
    P_new, FP_new = _update_memory(P, FP, X_new, FX_new, objective, config, f)
    _check_finite(FX_new, P_new, FP_new, step_index=n)
    return Swarm(X=X_new, V=V_new, P=P_new, FX=FX_new, FP=FP_new,
                 consensus=global_best(P_new, FP_new, config.alpha), step_index=n)


def step_cbo(swarm: Swarm, objective: Objective, config: SolverConfig, rng,
             counter=None) -> Swarm:
    f = _evaluator(counter)
    X, P, FP = swarm.X, swarm.P, swarm.FP
    G = global_best(P, FP, config.alpha)
    dp = P - X
    dg = G - X
    theta1 = rng.theta(X.shape)
    theta2 = rng.theta(X.shape)
    dt, sdt = config.dt, math.sqrt(config.dt)
    X_new = (X + config.lam1 * dt * dp + config.lam2 * dt * dg
             + config.sigma1 * sdt * dp * theta1 + config.sigma2 * sdt * dg * theta2)
    n = swarm.step_index + 1
    _check_finite(X_new, step_index=n)
    FX_new = f(objective, X_new)
    P_new, FP_new = _update_memory(P, FP, X_new, FX_new, objective, config, f)
    _check_finite(FX_new, P_new, FP_new, step_index=n)
    return Swarm(X=X_new, V=swarm.V, P=P_new, FX=FX_new, FP=FP_new,
                 consensus=global_best(P_new, FP_new, config.alpha), step_index=n)


def step_classic(swarm: Swarm, objective: Objective, config: SolverConfig, rng,
                 counter=None) -> Swarm:
    f = _evaluator(counter)
    X, V, P, FP = swarm.X, swarm.V, swarm.P, swarm.FP
    g = argmin_point(P, FP)
    w = config.m if config.mode == "classic_pso_inertia" else 1.0
    R1 = rng.uniform(X.shape)
    R2 = rng.uniform(X.shape)
    V_new = w * V + config.c1 * R1 * (P - X) + config.c2 * R2 * (g - X)
    X_new = X + V_new
    if config.clamp:
        X_new = np.clip(X_new, objective.lo, objective.hi)
    n = swarm.step_index + 1
    _check_finite(X_new, V_new, step_index=n)
    FX_new = f(objective, X_new)
    _check_finite(FX_new, step_index=n)
    better = FX_new < FP
    P_new = np.where(better[:, None], X_new, P)
    FP_new = np.where(better, FX_new, FP)
    return Swarm(X=X_new, V=V_new, P=P_new, FX=FX_new, FP=FP_new,
                 consensus=argmin_point(P_new, FP_new), step_index=n)


_STEPPERS = {
    "sdpso_nomem": step_no_memory,
    "sdpso_mem": step_with_memory,
    "cbo_mem": step_cbo,
    "classic_pso": step_classic,
    "classic_pso_inertia": step_classic,
}


def step(swarm, objective, config, rng, counter=None) -> Swarm:
    return _STEPPERS[config.mode](swarm, objective, config, rng, counter)


@dataclass
class RunResult:
    point: np.ndarray
    value: float
    n_iter: int
    n_evals: int
    diverged: bool = False
    seed: Optional[int] = None
    trajectory: Optional[list] = field(default=None, repr=False)
    swarm: Optional[Swarm] = field(default=None, repr=False)


TRACE_HEADER = ("step", "consensus_value", "population_variance")


def run(objective: Objective, config: SolverConfig, n_particles, seed=None,
        stopping: Stopping = Stopping(), init_box=None, trace=False,
        velocity_box=None) -> RunResult:
    """Iterate the mode's stepper until the consensus stalls or ``n_max``.

    The run stops once ``||Q^n - Q^(n-1)||_2 < delta_stall`` has held for
    ``n_stall`` consecutive iterations.
    """
    counter = EvalCounter()
    rng = RngStream(seed, config.noise)
    swarm = init(objective, config, n_particles, init_box=init_box,
                 velocity_box=velocity_box, rng=rng, counter=counter)
    stepper = _STEPPERS[config.mode]
    trajectory = [] if trace else None
    prev = swarm.consensus
    stall = 0
    n_iter = 0
    diverged = False
    try:
        for n_iter in range(1, stopping.n_max + 1):
            swarm = stepper(swarm, objective, config, rng, counter)
            q = swarm.consensus
            if np.linalg.norm(q - prev) < stopping.delta_stall:
                stall += 1
            else:
                stall = 0
            prev = q
            if trace:
                trajectory.append(_trace_row(swarm, objective))
            if stall >= stopping.n_stall:
                break
    except DivergenceError:
        diverged = True
    if diverged:
        return RunResult(point=prev, value=math.nan, n_iter=n_iter,
                         n_evals=counter.count, diverged=True, seed=seed,
                         trajectory=trajectory, swarm=swarm)
    value = float(objective.evaluate(swarm.consensus))
    return RunResult(point=swarm.consensus, value=value, n_iter=n_iter,
                     n_evals=counter.count, seed=seed, trajectory=trajectory, swarm=swarm)


def _trace_row(swarm, objective):
    q = swarm.consensus
    var = float(np.mean(np.sum((swarm.X - swarm.X.mean(axis=0)) ** 2, axis=1)))
    return (swarm.step_index, *q.tolist(), float(objective.evaluate(q)), var)


def write_trajectory(path, trajectory, dim):
    import csv

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", *[f"q{j}" for j in range(dim)], "consensus_value",
                    "population_variance"])
        for row in trajectory:
            w.writerow([row[0], *(repr(float(v)) for v in row[1:])])
