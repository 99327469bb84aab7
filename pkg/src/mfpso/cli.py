"""Command-line interface.

Exit codes: 0 success, 2 configuration error, 3 numerical divergence,
4 acceptance failure (``check``).
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import warnings

import numpy as np

from . import config as cfgmod
from .harness import TABLES, WORKERS_ENV, build_objective, replicate, table_suite, write_aggregate_csv
from .swarm import MODES, ConfigError, RngStream, SolverConfig, init, run, step, write_trajectory

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGED = 3
EXIT_CHECK = 4


class _Formatter(argparse.ArgumentDefaultsHelpFormatter, argparse.RawDescriptionHelpFormatter):
    pass


def _floats(text):
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text):
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _load(args):
    return cfgmod.load(args.config) if args.config else cfgmod.parse({})


def _outdir(path):
    os.makedirs(path, exist_ok=True)
    return path


# ---------------------------------------------------------------- optimize

def cmd_optimize(args):
    cfg = _load(args)
    cfg = cfgmod.with_overrides(cfg, "objective", function=args.function, dim=args.dim)
    cfg = cfgmod.with_overrides(cfg, "solver", mode=args.mode, m=args.m, sigma=args.sigma,
                                sigma2=args.sigma2, dt=args.dt)
    cfg = cfgmod.with_overrides(cfg, "experiment", n_particles=args.particles, seed=args.seed,
                                n_max=args.n_max)
    spec = cfg.experiment()
    obj = build_objective(spec, rng=np.random.default_rng(spec.seed))
    res = run(obj, spec.solver, spec.n_particles, seed=spec.seed, stopping=spec.stopping,
              init_box=(obj.lo, obj.hi), trace=args.trace)
    out = _outdir(args.out)
    if args.trace:
        write_trajectory(os.path.join(out, "trajectory.csv"), res.trajectory, obj.dim)
    with open(os.path.join(out, "result.csv"), "w") as fh:
        fh.write("n_iter,n_evals,diverged,value," + ",".join(f"x{i}" for i in range(obj.dim)) + "\n")
        fh.write(f"{res.n_iter},{res.n_evals},{int(res.diverged)},{res.value!r},"
                 + ",".join(repr(float(v)) for v in res.point) + "\n")
    if res.diverged:
        print(f"diverged at iteration {res.n_iter}", file=sys.stderr)
        return EXIT_DIVERGED
    err = float(np.max(np.abs(res.point - obj.minimizer)))
    print(f"point = {np.array2string(res.point, precision=6)}")
    print(f"value = {res.value:.6e}")
    print(f"iterations = {res.n_iter}  evaluations = {res.n_evals}  max-norm error = {err:.3e}")
    return EXIT_OK


# ---------------------------------------------------------------- benchmark

def cmd_benchmark(args):
    if args.table:
        seed = args.seed if args.seed is not None else 0
        specs = table_suite(args.table, n_r=args.runs or 500, seed=seed)
        if args.filter:
            specs = [s for s in specs if args.filter in s.label]
            if not specs:
                raise ConfigError(f"no table entries match {args.filter!r}")
    elif args.config:
        cfg = cfgmod.load(args.config)
        cfg = cfgmod.with_overrides(cfg, "experiment", n_r=args.runs, seed=args.seed)
        specs = [cfg.experiment()]
    else:
        raise ConfigError("benchmark needs --table or --config")
    out = _outdir(args.out)
    rows = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for spec in specs:
            agg, _ = replicate(spec, workers=args.workers,
                               runs_csv=os.path.join(out, f"runs_{spec.fingerprint()}.csv"))
            rows.append((spec, agg))
            err = "-" if agg.mean_error is None else f"{agg.mean_error:.2e}"
            print(f"{spec.label or spec.fingerprint()}: rate={100 * agg.rate:.1f}% error={err} "
                  f"F={agg.mean_f:.3e} iter={agg.mean_iter:.1f}")
    write_aggregate_csv(os.path.join(out, "aggregate.csv"), rows)
    return EXIT_OK


# ---------------------------------------------------------------- meanfield

def _snap_steps(snaps, tfinal, dt):
    steps = {}
    for t in snaps:
        if t <= 0 or t > tfinal + 1e-12:
            raise ConfigError(f"snapshot time {t} outside (0, tfinal]")
        steps[int(round(t / dt))] = t
    return steps


def cmd_meanfield(args):
    from . import meanfield as mf
    from .diagnostics import density_distance, wasserstein1_density
    from .objectives import make_objective, shift_minimum

    cfg = _load(args)
    cfg = cfgmod.with_overrides(cfg, "grid", nx=args.nx, nv=args.nv, dt=args.dt)
    cfg = cfgmod.with_overrides(cfg, "meanfield", m=args.m, alpha=args.alpha)
    function = args.function or cfg["objective"]["function"] or "ackley"
    g0 = cfg.grid()
    obj = make_objective(function, 1, domain=(g0.x_lo, g0.x_hi))
    if args.shift is not None:
        obj = shift_minimum(obj, [args.shift])
    params = cfg.meanfield()
    snaps = args.snap if args.snap else [args.tfinal]
    steps = _snap_steps(snaps, args.tfinal, g0.dt)
    n_steps = int(round(args.tfinal / g0.dt))
    out = _outdir(args.out)

    if args.pde == "cbo":
        state = mf.uniform_density_1d(g0.x_lo, g0.x_hi, args.nx or 120, g0.dt)
        advance = lambda s: mf.mf_cbo_step(s, obj, params)  # noqa: E731
        marginal = lambda s: s  # noqa: E731
    else:
        grid = g0 if args.pde == "pso" else mf.PhaseGrid(**{**cfg["grid"], "with_y": True})
        state = mf.uniform_density(grid)
        fn = mf.mf_pso_step if args.pde == "pso" else mf.mf_pso_memory_step
        advance = lambda s: fn(s, obj, params)  # noqa: E731
        marginal = mf.marginal_x

    swarm = rng = scfg = None
    if args.compare_particles:
        scfg = _particle_config(args.pde, params, g0.dt)
        rng = RngStream(args.seed)
        vbox = None if args.pde == "cbo" else (g0.v_lo, g0.v_hi)
        swarm = init(obj, scfg, args.compare_particles, init_box=(g0.x_lo, g0.x_hi),
                     velocity_box=vbox, rng=rng)
    report = []
    for n in range(1, n_steps + 1):
        state = advance(state)
        if swarm is not None:
            swarm = step(swarm, obj, scfg, rng)
        if n in steps:
            tag = f"{steps[n]:g}"
            rho = marginal(state)
            if args.pde != "cbo":
                mf.write_density(os.path.join(out, f"density_t{tag}.txt"), state)
            mf.write_marginal(os.path.join(out, f"marginal_t{tag}.csv"), rho)
            line = f"t={tag}: mass={rho.mass:.6f}"
            if swarm is not None:
                k = mf.kde(swarm.X[:, 0], rho.x)
                mf.write_marginal(os.path.join(out, f"kde_t{tag}.csv"), k)
                d = density_distance(k, rho)
                w1 = wasserstein1_density(swarm.X[:, 0], rho)
                report.append((steps[n], w1, d.l1, d.sup))
                line += f" L1={d.l1:.4f} W1={w1:.4f}"
            print(line)
    if report:
        with open(os.path.join(out, "distance.csv"), "w") as fh:
            fh.write("t,w1,l1,sup\n")
            for row in report:
                fh.write(",".join(repr(float(v)) for v in row) + "\n")
    return EXIT_OK


def _particle_config(pde, params, dt):
    if pde == "cbo":
        return SolverConfig(mode="sdpso_nomem", m=0.0, gamma=1.0, lam=params.lam,
                            sigma=params.sigma, alpha=params.alpha, dt=dt)
    if pde == "pso":
        return SolverConfig(mode="sdpso_nomem", m=params.m, gamma=params.gamma, lam=params.lam,
                            sigma=params.sigma, alpha=params.alpha, dt=dt)
    return SolverConfig(mode="sdpso_mem", m=params.m, gamma=params.gamma, lam1=params.lam1,
                        sigma1=params.sigma1, lam2=params.lam2, sigma2=params.sigma2,
                        nu=params.nu, beta=params.beta, alpha=params.alpha, dt=dt)


# ---------------------------------------------------------------- limit

def cmd_limit(args):
    from .diagnostics import loglog_slope, zero_inertia_rate
    from .objectives import make_objective

    cfg = _load(args)
    cfg = cfgmod.with_overrides(cfg, "solver", lam=args.lam, sigma=args.sigma, alpha=args.alpha,
                                dt=args.dt)
    base = cfg.solver().replace(mode="sdpso_nomem")
    obj = make_objective(args.function, args.dim, domain=(-3.0, 3.0))
    if any(m <= 0 for m in args.m_list):
        raise ConfigError("--m-list entries must be positive")
    rows = zero_inertia_rate(obj, base, args.m_list, args.seed, args.tfinal,
                             n_particles=args.particles)
    slope = loglog_slope([r[0] for r in rows], [r[1] for r in rows]) if len(rows) > 1 else math.nan
    out = _outdir(args.out)
    with open(os.path.join(out, "rate.csv"), "w") as fh:
        fh.write("m,gap,w1\n")
        for m, gap, w1 in rows:
            fh.write(f"{m!r},{gap!r},{w1!r}\n")
        fh.write(f"# slope,{slope!r}\n")
    for m, gap, w1 in rows:
        print(f"m={m:g}: gap={gap:.4e} W1={w1:.4e}")
    print(f"log-log slope = {slope:.3f}")
    return EXIT_OK


# ---------------------------------------------------------------- check

def cmd_check(args):
    from .acceptance import CHECKS, run_checks

    known = {n for n, *_ in CHECKS}
    unknown = sorted(set(args.only or ()) - known)
    if unknown:
        raise ConfigError(f"no check numbered {', '.join(map(str, unknown))}; "
                          f"choose from {min(known)}-{max(known)}")
    results = run_checks(args.only, workers=args.workers)
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return EXIT_CHECK if failed else EXIT_OK


# ---------------------------------------------------------------- parser

def build_parser():
    p = argparse.ArgumentParser(prog="mfpso", formatter_class=_Formatter,
                                description="Mean-field particle swarm optimization toolkit.",
                                epilog=f"Environment: {WORKERS_ENV} sets the default worker count.")
    p.add_argument("--print-schema", action="store_true", help="print the config schema and exit")
    sub = p.add_subparsers(dest="command")

    o = sub.add_parser("optimize", formatter_class=_Formatter, help="run one optimization")
    o.add_argument("--config", help="JSON config file")
    o.add_argument("--function", help="objective name (required unless in the config)")
    o.add_argument("--dim", type=int, help="dimension (config default 20)")
    o.add_argument("--particles", type=int, help="number of particles (config default 100)")
    o.add_argument("--mode", choices=MODES, help="solver mode (config default sdpso_nomem)")
    o.add_argument("--m", type=float, help="inertia weight (config default 0)")
    o.add_argument("--sigma", type=float, help="memoryless noise strength")
    o.add_argument("--sigma2", type=float, help="consensus noise strength in memory modes")
    o.add_argument("--dt", type=float, help="time step (config default 0.01)")
    o.add_argument("--n-max", type=int, help="iteration cap (config default 10000)")
    o.add_argument("--seed", type=int, help="random seed (config default 0)")
    o.add_argument("--trace", action="store_true", help="write trajectory.csv")
    o.add_argument("--out", default="mfpso_out", help="output directory")
    o.set_defaults(func=cmd_optimize)

    b = sub.add_parser("benchmark", formatter_class=_Formatter, help="replicated experiments")
    b.add_argument("--table", choices=TABLES, help="reproduce a benchmark table grid")
    b.add_argument("--config", help="JSON config describing one experiment")
    b.add_argument("--filter", help="only table entries whose label contains this text")
    b.add_argument("--runs", type=int, help="replicates per entry (default 500)")
    b.add_argument("--seed", type=int, help="master seed (default 0)")
    b.add_argument("--workers", type=int, default=None,
                   help=f"worker processes (default from {WORKERS_ENV}, else 1)")
    b.add_argument("--out", default="mfpso_out", help="output directory")
    b.set_defaults(func=cmd_benchmark)

    m = sub.add_parser("meanfield", formatter_class=_Formatter, help="one-dimensional mean-field runs")
    m.add_argument("--pde", choices=("pso", "pso_mem", "cbo"), default="pso", help="equation")
    m.add_argument("--config", help="JSON config (grid and meanfield sections)")
    m.add_argument("--function", help="objective (default ackley)")
    m.add_argument("--shift", type=float, help="minimizer location")
    m.add_argument("--tfinal", type=float, default=1.0, help="final time")
    m.add_argument("--snap", type=_floats, help="comma-separated snapshot times (default tfinal)")
    m.add_argument("--nx", type=int, help="x nodes (90; 120 for cbo)")
    m.add_argument("--nv", type=int, help="v nodes (120)")
    m.add_argument("--dt", type=float, help="time step (0.01)")
    m.add_argument("--m", type=float, help="inertia weight (0.5)")
    m.add_argument("--alpha", type=float, help="consensus sharpness (30)")
    m.add_argument("--compare-particles", type=int, default=0,
                   help="also run this many particles and write KDE and distances")
    m.add_argument("--seed", type=int, default=0, help="particle seed")
    m.add_argument("--out", default="mfpso_out", help="output directory")
    m.set_defaults(func=cmd_meanfield)

    lim = sub.add_parser("limit", formatter_class=_Formatter, help="zero-inertia coupling gap")
    lim.add_argument("--m-list", type=_floats, default=[0.2, 0.1, 0.05, 0.025], help="inertia values")
    lim.add_argument("--config", help="JSON config (solver section)")
    lim.add_argument("--function", default="ackley", help="objective")
    lim.add_argument("--dim", type=int, default=1, help="dimension")
    lim.add_argument("--particles", type=int, default=500, help="number of particles")
    lim.add_argument("--tfinal", type=float, default=1.0, help="final time")
    lim.add_argument("--lam", type=float, default=1.0, help="drift")
    lim.add_argument("--sigma", type=float, default=1.0 / math.sqrt(3.0), help="noise strength")
    lim.add_argument("--alpha", type=float, default=30.0, help="consensus sharpness")
    lim.add_argument("--dt", type=float, default=0.01, help="time step")
    lim.add_argument("--seed", type=int, default=5, help="seed of the shared noise tape")
    lim.add_argument("--out", default="mfpso_out", help="output directory")
    lim.set_defaults(func=cmd_limit)

    c = sub.add_parser("check", formatter_class=_Formatter, help="desk-scale acceptance suite")
    c.add_argument("--only", type=_ints, help="comma-separated check numbers (default all)")
    c.add_argument("--workers", type=int, default=None, help="worker processes for table checks")
    c.set_defaults(func=cmd_check)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    if args.print_schema:
        print(cfgmod.schema_markdown())
        return EXIT_OK
    if not getattr(args, "func", None):
        parser.print_help()
        return EXIT_CONFIG
    from .meanfield import CFLError, SchemeError

    try:
        return args.func(args)
    except (ConfigError, CFLError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SchemeError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_DIVERGED


if __name__ == "__main__":
    sys.exit(main())
