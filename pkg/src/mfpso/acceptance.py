"""Desk-scale acceptance checks.

Each check returns a :class:`CheckResult`; :func:`run_checks` runs a selection
and prints one ``PASS``/``FAIL`` line per check. The same functions back the
test suite and ``mfpso check``.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import consensus as cs
from .diagnostics import (
    decay_rate_ci,
    density_distance,
    loglog_slope,
    lyapunov,
    mu_condition,
    wasserstein1_density,
    zero_inertia_rate,
)
from .harness import replicate, table_suite
from .meanfield import (
    MFParams,
    PhaseGrid,
    fokker_planck_v,
    kde,
    marginal_x,
    maxwellian,
    mf_cbo_step,
    mf_pso_memory_step,
    mf_pso_step,
    uniform_density,
    uniform_density_1d,
)
from .objectives import make_objective, shift_minimum
from .swarm import RngStream, SolverConfig, init, step, step_classic, step_with_memory

__all__ = ["CheckResult", "CHECKS", "run_one", "run_checks", "DESK_RUNS"]

DESK_RUNS = 50
SQRT3 = math.sqrt(3.0)


@dataclass
class CheckResult:
    number: int
    name: str
    passed: bool
    detail: str
    values: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.number:2d} {self.name}: {self.detail}"


def _spec(table, label, n_r):
    for s in table_suite(table, n_r=n_r):
        if s.label == label:
            return s
    raise KeyError(label)


def check_ackley_inertia_table(n_r=DESK_RUNS, workers=None):
    """Ackley, d=20, memoryless, m=0: full success, small error, ~1032 iterations at N=100."""
    rows = {}
    for n in (50, 100, 200):
        agg, _ = replicate(_spec("table1A", f"ackley m=0.0 nomem N={n}", n_r), workers=workers)
        rows[n] = agg
    rates_ok = all(a.rate == 1.0 for a in rows.values())
    err_ok = all(a.mean_error is not None and a.mean_error <= 1e-3 for a in rows.values())
    it100 = rows[100].mean_iter
    iter_ok = abs(it100 - 1032.0) <= 0.3 * 1032.0
    detail = ", ".join(f"N={n}: rate={a.rate:.2f} err={a.mean_error:.2e} iter={a.mean_iter:.0f}"
                       if a.mean_error is not None else f"N={n}: rate={a.rate:.2f}"
                       for n, a in rows.items())
    return rates_ok and err_ok and iter_ok, detail, {n: a for n, a in rows.items()}


def check_rastrigin_inertia_table(n_r=DESK_RUNS, workers=None):
    """Rastrigin memory mode at m=0, N=200 succeeds; memoryless N=50 degrades as m grows
    and collapses at m=0.1."""
    good, _ = replicate(_spec("table1R", "rastrigin m=0.0 mem N=200", n_r), workers=workers)
    ladder = {}
    for m in (0.0, 0.05, 0.1):
        ladder[m], _ = replicate(_spec("table1R", f"rastrigin m={m} nomem N=50", n_r),
                                 workers=workers)
    rates = [ladder[m].rate for m in (0.0, 0.05, 0.1)]
    ordered = all(b <= a for a, b in zip(rates, rates[1:]))
    ok = good.rate >= 0.95 and rates[-1] < 0.20 and good.rate > rates[-1] and ordered
    detail = (f"mem m=0 N=200 rate={good.rate:.2f}; nomem N=50 rates "
              + ", ".join(f"m={m}:{ladder[m].rate:.2f}" for m in ladder))
    return ok, detail, {"good": good, "ladder": ladder}


def check_function_table(n_r=DESK_RUNS, workers=None):
    """Reference-cube suite at xi=0.25, N=100: Schwefel 2.20 and XSY 4 rates, Salomon value."""
    res = {}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for name in ("schwefel220", "xsy4", "salomon"):
            res[name], _ = replicate(_spec("tableFunctions", f"{name} xi=0.25 N=100", n_r),
                                     workers=workers)
    sal = res["salomon"].mean_f
    ok_sal = 0.321 / 2 <= sal <= 0.321 * 2
    ok = res["schwefel220"].rate == 1.0 and res["xsy4"].rate == 1.0 and ok_sal
    detail = (f"schwefel220 rate={res['schwefel220'].rate:.2f}, xsy4 rate={res['xsy4'].rate:.2f}, "
              f"salomon mean_f={sal:.3g} (target 0.321 within x2)")
    return ok, detail, res


def check_classic_equivalence(n_steps=100, n_particles=10, dim=5, seed=7):
    """Memory scheme with the classic parameter map matches classic PSO step for step."""
    obj = make_objective("rastrigin", dim)
    w, c1, c2 = 0.7, 1.5, 1.8
    mem_cfg = SolverConfig.from_classic(c1, c2, w)
    cls_cfg = mem_cfg.replace(mode="classic_pso_inertia")
    ra, rb = RngStream(seed, "uniform"), RngStream(seed, "uniform")
    a = init(obj, mem_cfg, n_particles, init_box=(-3, 3), velocity_box=(-1, 1), rng=ra)
    b = init(obj, cls_cfg, n_particles, init_box=(-3, 3), velocity_box=(-1, 1), rng=rb)
    worst = 0.0
    for _ in range(n_steps):
        a = step_with_memory(a, obj, mem_cfg, ra)
        b = step_classic(b, obj, cls_cfg, rb)
        worst = max(worst, float(np.max(np.abs(a.X - b.X))), float(np.max(np.abs(a.V - b.V))),
                    float(np.max(np.abs(a.P - b.P))))
    return worst <= 1e-12, f"max deviation over {n_steps} steps = {worst:.2e}", {"max_dev": worst}


def _fig_params():
    return dict(lam=1.0, sigma=1.0 / SQRT3, alpha=30.0)


def check_zero_inertia_rate(seed=5, n_particles=500, t_final=1.0):
    """Coupled-tape gap to the zero-inertia scheme scales like m."""
    obj = make_objective("ackley", 1, domain=(-3.0, 3.0))
    cfg = SolverConfig(mode="sdpso_nomem", dt=0.01, **_fig_params())
    m_list = [0.2, 0.1, 0.05, 0.025]
    rows = zero_inertia_rate(obj, cfg, m_list, seed, t_final, n_particles=n_particles)
    slope = loglog_slope([r[0] for r in rows], [r[1] for r in rows])
    zero = zero_inertia_rate(obj, cfg, [0.0], seed, t_final, n_particles=n_particles)[0][1]
    detail = "gaps " + ", ".join(f"m={m}:{g:.3g}" for m, g, _ in rows) + f"; slope={slope:.3f}; gap(m=0)={zero}"
    return slope >= 0.8 and zero == 0.0, detail, {"rows": rows, "slope": slope, "zero": zero}


def check_meanfield_vs_particles(n_particles=100_000, seed=1):
    """Kinetic PDE marginal versus particle KDE at t=0.5 and t=1 (L1 <= 0.1)."""
    obj = make_objective("ackley", 1, domain=(-3.0, 3.0))
    grid = PhaseGrid()
    params = MFParams(m=0.5, gamma=0.5, **_fig_params())
    cfg = SolverConfig(mode="sdpso_nomem", m=0.5, gamma=0.5, dt=grid.dt, **_fig_params())
    rng = RngStream(seed)
    sw = init(obj, cfg, n_particles, init_box=(grid.x_lo, grid.x_hi),
              velocity_box=(grid.v_lo, grid.v_hi), rng=rng)
    f = uniform_density(grid)
    out = {}
    for n in range(1, 101):
        f = mf_pso_step(f, obj, params)
        sw = step(sw, obj, cfg, rng)
        if n in (50, 100):
            rep = density_distance(kde(sw.X[:, 0], grid.x), marginal_x(f))
            out[n * grid.dt] = (rep.l1, f.mass)
    ok = all(l1 <= 0.1 for l1, _ in out.values())
    detail = ", ".join(f"t={t:g}: L1={l1:.3f} (pde mass {m:.3f})" for t, (l1, m) in out.items())
    return ok, detail, out


def _cbo_density(obj, t_final=2.0):
    rho = uniform_density_1d()
    params = MFParams(**_fig_params())
    for _ in range(int(round(t_final / rho.dt))):
        rho = mf_cbo_step(rho, obj, params)
    return rho


def check_inertia_ordering(n_particles=100_000, seed=2):
    """W1 between inertial particles and the CBO density at t=2 shrinks with m."""
    ok = True
    parts = []
    values = {}
    for x_star in (0.0, 1.0):
        obj = shift_minimum(make_objective("ackley", 1, domain=(-3.0, 3.0)), [x_star])
        rho = _cbo_density(obj)
        w = []
        for m in (0.5, 0.1, 0.01):
            cfg = SolverConfig(mode="sdpso_nomem", m=m, dt=0.01, **_fig_params())
            rng = RngStream(seed)
            sw = init(obj, cfg, n_particles, init_box=(-3.0, 3.0), rng=rng)
            for _ in range(200):
                sw = step(sw, obj, cfg, rng)
            w.append(wasserstein1_density(sw.X[:, 0], rho))
        values[x_star] = w
        ok = ok and w[0] > w[1] > w[2]
        parts.append(f"x*={x_star:g}: " + " > ".join(f"{v:.4f}" for v in w))
    return ok, "; ".join(parts), values


def _track(step_fn, f, obj, params, n_steps):
    mass0 = f.mass
    masses = [mass0]
    lowest = float(f.values.min())
    for _ in range(n_steps):
        f = step_fn(f, obj, params)
        masses.append(f.mass)
        lowest = min(lowest, float(f.values.min()))
    m = np.array(masses)
    monotone = bool(np.all(np.diff(m) <= 1e-10)) and m.max() <= mass0 + 1e-10
    return monotone, lowest, m[-1]


def maxwellian_order(flux="central", sizes=(61, 121, 241, 481), dt=0.01):
    """One-step residual of the frozen-coefficient velocity step on the Maxwellian."""
    x = np.array([0.5, 0.75, 1.0])
    res = []
    for nv in sizes:
        v = np.linspace(-4.0, 4.0, nv)
        M = maxwellian(x, v, 0.0, m=1.0, sigma=1.0)
        M[:, 0] = M[:, -1] = 0.0
        dist = x[:, None]
        out = fokker_planck_v(M, v, 0.0 * dist, 0.5 * dist**2, 1.0, dt, flux)
        res.append(float(np.max(np.abs(out - M))))
    h = [8.0 / (n - 1) for n in sizes]
    return loglog_slope(h, res), res


def check_pde_invariants(n_steps=100):
    """Mass monotone, positivity, and the Maxwellian residual order."""
    detail = []
    ok = True
    ack = make_objective("ackley", 1, domain=(-3.0, 3.0))
    ras = make_objective("rastrigin", 1, domain=(-3.0, 3.0))
    p = MFParams(m=0.5, gamma=0.5, **_fig_params())
    runs = [
        ("pso", mf_pso_step, uniform_density(PhaseGrid()), ack, p),
        ("pso_mem", mf_pso_memory_step, uniform_density(PhaseGrid(with_y=True)), ras,
         p.replace(lam1=1.0, sigma1=1.0 / SQRT3, lam2=0.0, sigma2=0.0, nu=0.5, beta=30.0)),
        ("cbo", mf_cbo_step, uniform_density_1d(), ack, MFParams(**_fig_params())),
    ]
    for name, fn, f0, obj, params in runs:
        mono, low, final = _track(fn, f0, obj, params, n_steps)
        ok = ok and mono and low >= -1e-12
        detail.append(f"{name}: monotone={mono} min={low:.1e} mass={final:.3f}")
    order, _ = maxwellian_order("central")
    _, cc = maxwellian_order("chang_cooper")
    ok = ok and order >= 1.8 and max(cc) <= 1e-6
    detail.append(f"Maxwellian order={order:.2f} (Chang-Cooper residual {max(cc):.1e})")
    return ok, "; ".join(detail), {"order": order}


def check_lyapunov_decay(n_r=DESK_RUNS, n_steps=500, n_particles=100):
    """log E[H] decays on Ackley d=20 at m=0.05 in a mu>0 regime (95% CI below zero)."""
    obj = make_objective("ackley", 20)
    cfg = SolverConfig(mode="sdpso_nomem", m=0.05, lam=0.5, sigma=0.1, alpha=0.01, dt=0.01)
    box = (-3.0 * np.ones(20), 3.0 * np.ones(20))
    every = 10
    H = []
    mus = []
    for seed in range(n_r):
        rng = RngStream(seed)
        sw = init(obj, cfg, n_particles, init_box=box, rng=rng)
        mu_run = mu_condition(sw, obj, cfg)
        row = []
        for n in range(1, n_steps + 1):
            sw = step(sw, obj, cfg, rng)
            mu_run = min(mu_run, mu_condition(sw, obj, cfg))
            if n % every == 0:
                row.append(lyapunov(sw, cfg.m, cfg.gamma).H)
        H.append(row)
        mus.append(mu_run)
    t = np.arange(1, n_steps // every + 1) * every * cfg.dt
    mean, lo, hi = decay_rate_ci(t, H)
    ok = min(mus) > 0 and hi < 0
    return ok, f"min mu over all steps={min(mus):.1f}; slope={mean:.3f} 95% CI [{lo:.3f}, {hi:.3f}]", \
        {"ci": (mean, lo, hi)}


def check_consensus_properties(n_cases=10_000, seed=11):
    """Randomized consensus/Laplace invariants plus the large-alpha arg-min match."""
    rng = np.random.default_rng(seed)
    fails = {k: 0 for k in ("shift", "hull", "alpha_monotone", "laplace", "switch", "argmin")}
    for _ in range(n_cases):
        n = int(rng.integers(1, 12))
        d = int(rng.integers(1, 4))
        pts = rng.uniform(-10, 10, (n, d))
        vals = rng.uniform(-5, 5, n)
        alpha = float(rng.uniform(0, 50))
        g = cs.global_best(pts, vals, alpha)
        c = float(rng.uniform(-100, 100))
        if np.max(np.abs(cs.global_best(pts, vals + c, alpha) - g)) > 1e-12 * max(1.0, np.abs(pts).max()):
            fails["shift"] += 1
        tol = 1e-12 * max(1.0, np.abs(pts).max())
        if np.any(g < pts.min(axis=0) - tol) or np.any(g > pts.max(axis=0) + tol):
            fails["hull"] += 1
        two = rng.uniform(-10, 10, (2, 1))
        tv = rng.uniform(-5, 5, 2)
        if tv[0] != tv[1]:
            target = two[int(np.argmin(tv))]
            a1, a2 = sorted(rng.uniform(0, 20, 2))
            d1 = abs(cs.global_best(two, tv, a1) - target)[0]
            d2 = abs(cs.global_best(two, tv, a2) - target)[0]
            if d2 > d1 + 1e-12:
                fails["alpha_monotone"] += 1
        a = float(rng.uniform(0.1, 100))
        lv = cs.laplace_value(vals, a)
        if not (vals.min() - 1e-12 <= lv <= vals.min() + math.log(n) / a + 1e-12):
            fails["laplace"] += 1
        fx, fy, beta = rng.uniform(-5, 5, 3)
        if cs.smooth_switch(fx, fy, abs(beta)) + cs.smooth_switch(fy, fx, abs(beta)) != 2.0:
            fails["switch"] += 1
        # distinct values, alpha = 1e6: softmin equals the arg-min point
        dv = rng.permutation(n).astype(float) + rng.uniform(0, 0.5)
        if np.max(np.abs(cs.global_best(pts, dv, 1e6) - pts[int(np.argmin(dv))])) > 1e-9:
            fails["argmin"] += 1
    bad = {k: v for k, v in fails.items() if v}
    detail = f"{n_cases} cases per property; " + ("all hold" if not bad else f"failures {bad}")
    return not bad, detail, fails


CHECKS = [
    (1, "Ackley inertia table reproduction", check_ackley_inertia_table),
    (2, "Rastrigin inertia table ordering", check_rastrigin_inertia_table),
    (3, "reference-cube function suite spot rows", check_function_table),
    (4, "classic PSO equivalence", check_classic_equivalence),
    (5, "zero-inertia rate", check_zero_inertia_rate),
    (6, "mean-field vs particles", check_meanfield_vs_particles),
    (7, "inertia ordering against CBO density", check_inertia_ordering),
    (8, "PDE invariants", check_pde_invariants),
    (9, "Lyapunov decay", check_lyapunov_decay),
    (10, "consensus and Laplace properties", check_consensus_properties),
]

_TAKES_WORKERS = {1, 2, 3}


def run_one(number, workers=None) -> CheckResult:
    for num, name, fn in CHECKS:
        if num == number:
            t0 = time.perf_counter()
            ok, detail, values = fn(workers=workers) if num in _TAKES_WORKERS else fn()
            return CheckResult(num, name, bool(ok), detail, values, time.perf_counter() - t0)
    raise KeyError(f"no check numbered {number}")


def run_checks(numbers=None, workers=None, echo=print):
    numbers = [c[0] for c in CHECKS] if numbers is None else list(numbers)
    results = []
    for num in numbers:
        res = run_one(num, workers)
        if echo is not None:
            echo(res.line())
        results.append(res)
    return results
