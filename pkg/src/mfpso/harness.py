"""Replicated experiments and the benchmark table grids."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .objectives import (
    FUNCTION_NAMES,
    Objective,
    make_objective,
    rescale_to_reference,
    shift_minimum,
)
from .swarm import ConfigError, SolverConfig, Stopping, run

__all__ = [
    "CRITERIA",
    "TABLES",
    "ExperimentSpec",
    "RunReport",
    "AggregateReport",
    "build_objective",
    "judge",
    "run_seed",
    "run_once",
    "aggregate",
    "replicate",
    "table_suite",
    "default_workers",
    "write_runs_csv",
    "write_aggregate_csv",
]

CRITERIA = ("position_only", "position_or_value")
TABLES = ("table1R", "table1A", "table3R", "table3A", "tableFunctions")
WORKERS_ENV = "MFPSO_WORKERS"


@dataclass(frozen=True)
class ExperimentSpec:
    """One row-cell of a benchmark table.

    ``domain`` is the search box (defaults to the function's classical one);
    ``shift`` moves the minimizer to ``shift * ones(d)``; ``rescale`` maps the
    domain onto ``[-1, 1]^d`` with minimum value 0. Particles start uniformly
    in the (final) domain.
    """

    function: str = "ackley"
    dim: int = 20
    shift: Optional[float] = None
    domain: Optional[tuple] = None
    rescale: bool = False
    solver: SolverConfig = field(default_factory=SolverConfig)
    n_particles: int = 100
    n_r: int = 500
    seed: int = 0
    delta_err: float = 0.25
    delta_fun: float = 0.01
    delta_stall: float = 1e-4
    n_stall: int = 200
    n_max: int = 10_000
    success_criterion: str = "position_only"
    label: str = ""

    def __post_init__(self):
        if self.n_r < 1:
            raise ConfigError("n_r must be at least 1")
        if self.n_particles < 1:
            raise ConfigError("n_particles must be at least 1")
        if min(self.delta_err, self.delta_fun, self.delta_stall) <= 0:
            raise ConfigError("thresholds must be positive")
        if self.domain is not None:
            object.__setattr__(self, "domain", tuple(float(v) for v in self.domain))
        if self.success_criterion not in CRITERIA:
            raise ConfigError(f"unknown success criterion {self.success_criterion!r}")
        try:
            make_objective(self.function, self.dim, domain=self.domain,
                           random_coeffs=np.zeros(self.dim) if "xsy" in self.function.lower() else None)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        Stopping(self.delta_stall, self.n_stall, self.n_max)

    @property
    def stopping(self) -> Stopping:
        return Stopping(self.delta_stall, self.n_stall, self.n_max)

    def replace(self, **changes) -> "ExperimentSpec":
        return dataclasses.replace(self, **changes)

    def as_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["domain"] = list(self.domain) if self.domain is not None else None
        return d

    def fingerprint(self) -> str:
        blob = json.dumps(self.as_dict(), sort_keys=True, default=repr)
        return hashlib.sha256(blob.encode()).hexdigest()[:12]


@dataclass(frozen=True)
class RunReport:
    run_id: int
    seed: int
    success: bool
    diverged: bool
    error_l2: float
    f_value: float
    n_iter: int


@dataclass(frozen=True)
class AggregateReport:
    fingerprint: str
    label: str
    n_runs: int
    rate: float
    mean_error: Optional[float]
    mean_f: float
    mean_iter: float


def build_objective(spec: ExperimentSpec, rng=None) -> Objective:
    obj = make_objective(spec.function, spec.dim, domain=spec.domain, rng=rng)
    if spec.shift is not None:
        obj = shift_minimum(obj, spec.shift)
    if spec.rescale:
        obj = rescale_to_reference(obj)
    return obj


def judge(point, value, spec: ExperimentSpec, objective: Objective) -> bool:
    """Strict infinity-norm position test, optionally or-ed with a value test."""
    point = np.asarray(point, dtype=float)
    if not np.all(np.isfinite(point)):
        return False
    ok = float(np.max(np.abs(point - objective.minimizer))) < spec.delta_err
    if spec.success_criterion == "position_or_value":
        ok = ok or abs(value - objective.min_value) < spec.delta_fun
    return bool(ok)


def run_seed(master_seed: int, run_id: int) -> int:
    """Independent 64-bit seed for run ``run_id`` (spawn-key derivation, so
    appending runs never alters earlier ones)."""
    ss = np.random.SeedSequence(master_seed, spawn_key=(run_id,))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def run_once(spec: ExperimentSpec, run_id: int) -> RunReport:
    seed = run_seed(spec.seed, run_id)
    # coefficient draws (XSY random) come from their own child stream
    coeff_rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(1,)))
    obj = build_objective(spec, rng=coeff_rng)
    res = run(obj, spec.solver, spec.n_particles, seed=seed, stopping=spec.stopping,
              init_box=(obj.lo, obj.hi))
    if res.diverged:
        return RunReport(run_id, seed, False, True, math.inf, math.nan, res.n_iter)
    err = float(np.linalg.norm(res.point - obj.minimizer))
    ok = judge(res.point, res.value, spec, obj)
    return RunReport(run_id, seed, ok, False, err, res.value, res.n_iter)


def aggregate(spec: ExperimentSpec, runs) -> AggregateReport:
    """Fold run reports: error over successes, value and iterations over all runs."""
    runs = sorted(runs, key=lambda r: r.run_id)
    if not runs:
        raise ValueError("no runs to aggregate")
    succ = [r for r in runs if r.success]
    finite_f = [r.f_value for r in runs if not math.isnan(r.f_value)]
    return AggregateReport(
        fingerprint=spec.fingerprint(),
        label=spec.label,
        n_runs=len(runs),
        rate=len(succ) / len(runs),
        mean_error=math.fsum(r.error_l2 for r in succ) / len(succ) if succ else None,
        mean_f=math.fsum(finite_f) / len(finite_f) if finite_f else math.nan,
        mean_iter=math.fsum(r.n_iter for r in runs) / len(runs),
    )


def default_workers() -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ConfigError(f"{WORKERS_ENV} must be an integer, got {env!r}") from None
        if n < 1:
            raise ConfigError(f"{WORKERS_ENV} must be positive")
        return n
    return 1


def _run_star(args):
    return run_once(*args)


def replicate(spec: ExperimentSpec, workers: Optional[int] = None, runs_csv=None):
    """Run ``spec.n_r`` seeded trials; returns ``(AggregateReport, [RunReport])``."""
    workers = default_workers() if workers is None else workers
    jobs = [(spec, i) for i in range(spec.n_r)]
    if workers > 1 and spec.n_r > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(_run_star, jobs, chunksize=max(1, spec.n_r // (4 * workers))))
    else:
        reports = [_run_star(j) for j in jobs]
    if runs_csv is not None:
        write_runs_csv(runs_csv, reports)
    return aggregate(spec, reports), reports


def write_runs_csv(path, reports):
    with open(path, "w") as fh:
        fh.write("run_id,seed,success,diverged,error_l2,f_value,n_iter\n")
        for r in reports:
            fh.write(f"{r.run_id},{r.seed},{int(r.success)},{int(r.diverged)},"
                     f"{r.error_l2!r},{r.f_value!r},{r.n_iter}\n")


def write_aggregate_csv(path, rows):
    """``rows`` is a list of ``(spec, AggregateReport)``."""
    with open(path, "w") as fh:
        fh.write("fingerprint,label,function,mode,m,sigma,sigma2,xi,shift,n_particles,n_r,"
                 "rate,mean_error,mean_f,mean_iter\n")
        for spec, agg in rows:
            s = spec.solver
            xi = s.lam1 / s.lam2 if s.lam2 else 0.0
            err = "" if agg.mean_error is None else repr(agg.mean_error)
            shift = "" if spec.shift is None else repr(spec.shift)
            fh.write(f"{agg.fingerprint},{spec.label},{spec.function},{s.mode},{s.m!r},"
                     f"{s.sigma!r},{s.sigma2!r},{xi!r},{shift},{spec.n_particles},{agg.n_runs},"
                     f"{agg.rate!r},{err},{agg.mean_f!r},{agg.mean_iter!r}\n")


# Grid of the inertia tables: (m, sigma without memory, sigma2 with memory)
_INERTIA_ROWS = ((0.0, 9.0, 11.0), (0.01, 7.0, 9.0), (0.05, 3.5, 4.5), (0.10, 2.0, 3.0))
_N_VALUES = (50, 100, 200)
_COMMON = dict(dt=0.01, nu=50.0, beta=3.0e3, alpha=5.0e4, lam=1.0, lam2=1.0, lam1=0.0, sigma1=0.0)


def _inertia_table(function, n_r, seed):
    specs = []
    for m, sig, sig2 in _INERTIA_ROWS:
        for memory in (False, True):
            if memory:
                solver = SolverConfig(mode="sdpso_mem", m=m, sigma2=sig2, **_COMMON)
            else:
                solver = SolverConfig(mode="sdpso_nomem", m=m, sigma=sig, **_COMMON)
            for n in _N_VALUES:
                label = f"{function} m={m} {'mem' if memory else 'nomem'} N={n}"
                specs.append(ExperimentSpec(function=function, dim=20, domain=(-3.0, 3.0),
                                            solver=solver, n_particles=n, n_r=n_r, seed=seed,
                                            label=label))
    return specs


def _local_best_table(function, n_r, seed):
    specs = []
    for shift in (0.0, 1.0, 2.0):
        for xi, sig2 in ((0.0, 11.0), (0.25, 8.5)):
            solver = SolverConfig(mode="cbo_mem", m=0.0, lam1=xi, sigma1=xi * sig2,
                                  lam2=1.0, sigma2=sig2, dt=0.01, nu=50.0, beta=3.0e3, alpha=5.0e4)
            for n in _N_VALUES:
                specs.append(ExperimentSpec(function=function, dim=20, shift=shift,
                                            domain=(-3.0, 3.0), solver=solver, n_particles=n,
                                            n_r=n_r, seed=seed,
                                            label=f"{function} x*={shift} xi={xi} N={n}"))
    return specs


def _functions_table(n_r, seed):
    specs = []
    for name in FUNCTION_NAMES:
        for xi, sig2 in ((0.0, 8.0), (0.25, 6.5)):
            solver = SolverConfig(mode="cbo_mem", m=0.0, lam1=xi, sigma1=xi * sig2,
                                  lam2=1.0, sigma2=sig2, dt=0.01, nu=50.0, beta=3.0e3, alpha=5.0e4)
            for n in _N_VALUES:
                specs.append(ExperimentSpec(function=name, dim=20, rescale=True, solver=solver,
                                            n_particles=n, n_r=n_r, seed=seed, delta_err=0.1,
                                            delta_fun=0.01, success_criterion="position_or_value",
                                            label=f"{name} xi={xi} N={n}"))
    return specs


def table_suite(name, n_r=500, seed=0):
    """Parameter grid of one benchmark table as a list of specs."""
    if name == "table1R":
        return _inertia_table("rastrigin", n_r, seed)
    if name == "table1A":
        return _inertia_table("ackley", n_r, seed)
    if name == "table3R":
        return _local_best_table("rastrigin", n_r, seed)
    if name == "table3A":
        return _local_best_table("ackley", n_r, seed)
    if name == "tableFunctions":
        return _functions_table(n_r, seed)
    raise ConfigError(f"unknown table {name!r}; choose from {', '.join(TABLES)}")
