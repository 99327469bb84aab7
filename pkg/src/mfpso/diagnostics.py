"""Run-time probes: the Lyapunov functional, the zero-inertia coupling gap,
Laplace sweeps and 1D distribution distances."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .consensus import laplace_value
from .meanfield import Density1D, trapezoid_weights
from .objectives import Objective
from .swarm import RngStream, SolverConfig, Swarm, init, step

__all__ = [
    "LyapunovSample",
    "DistanceReport",
    "lyapunov",
    "lyapunov_bounds",
    "mu_condition",
    "wasserstein1_1d",
    "wasserstein1_density",
    "density_distance",
    "loglog_slope",
    "zero_inertia_rate",
    "laplace_sweep",
    "decay_rate_ci",
    "write_lyapunov_csv",
]


@dataclass(frozen=True)
class LyapunovSample:
    t: float
    H: float
    variance: float
    kinetic: float
    mu: float = math.nan


@dataclass(frozen=True)
class DistanceReport:
    w1: float
    l1: float
    sup: float


def lyapunov(swarm: Swarm, m, gamma, t=0.0, mu=math.nan) -> LyapunovSample:
    """Population average of ``k^2 |dX|^2 + |V|^2 + k dX.V`` with ``k = gamma/(2m)``
    and ``dX`` the deviation from the population mean."""
    if not m > 0:
        raise ValueError("lyapunov functional needs m > 0")
    k = gamma / (2.0 * m)
    dX = swarm.X - swarm.X.mean(axis=0)
    V = swarm.V
    var = float(np.mean(np.sum(dX * dX, axis=1)))
    kin = float(np.mean(np.sum(V * V, axis=1)))
    cross = float(np.mean(np.sum(dX * V, axis=1)))
    return LyapunovSample(t=t, H=k * k * var + kin + k * cross, variance=var, kinetic=kin, mu=mu)


def lyapunov_bounds(sample: LyapunovSample, m, gamma):
    """Lower and upper quadratic bounds ``(1/2)(k^2 var + kin)`` and
    ``(3/2)(k^2 var + kin)`` that hold for every population."""
    k = gamma / (2.0 * m)
    q = k * k * sample.variance + sample.kinetic
    return 0.5 * q, 1.5 * q


def mu_condition(swarm: Swarm, objective: Objective, config: SolverConfig) -> float:
    """Decay coefficient with the population minimum standing in for inf F.

    ``lam gamma / (2 m^2) - (2 lam^2 / (gamma m) + sigma^2 / m^2) * 4 exp(-alpha Fmin) / mean exp(-alpha F)``.
    """
    m, gamma, lam, sigma, alpha = config.m, config.gamma, config.lam, config.sigma, config.alpha
    if not m > 0:
        raise ValueError("mu condition needs m > 0")
    F = np.asarray(objective.evaluate(swarm.X), dtype=float)
    ratio = 1.0 / float(np.mean(np.exp(-alpha * (F - F.min()))))
    return lam * gamma / (2.0 * m * m) - (2.0 * lam * lam / (gamma * m) + sigma * sigma / (m * m)) * 4.0 * ratio


def wasserstein1_1d(a, b) -> float:
    """Exact W1 between two empirical measures on the line."""
    a = np.sort(np.asarray(a, dtype=float).ravel())
    b = np.sort(np.asarray(b, dtype=float).ravel())
    if a.size == 0 or b.size == 0:
        raise ValueError("empty sample set")
    if a.size == b.size:
        return float(np.mean(np.abs(a - b)))
    # integrate |Qa - Qb| over the merged quantile breakpoints
    u = np.union1d(np.arange(1, a.size) / a.size, np.arange(1, b.size) / b.size)
    u = np.concatenate(([0.0], u, [1.0]))
    mid = 0.5 * (u[:-1] + u[1:])
    qa = a[np.minimum((mid * a.size).astype(np.int64), a.size - 1)]
    qb = b[np.minimum((mid * b.size).astype(np.int64), b.size - 1)]
    return float(np.sum(np.abs(qa - qb) * np.diff(u)))


def _grid_cdf(rho: Density1D):
    w = np.clip(rho.values, 0.0, None)
    cum = np.concatenate(([0.0], np.cumsum(0.5 * (w[1:] + w[:-1]) * np.diff(rho.x))))
    if cum[-1] <= 0:
        raise ValueError("density has no mass")
    return cum / cum[-1]


def wasserstein1_density(samples, rho: Density1D, resolution=20001) -> float:
    """W1 between an empirical measure and a grid density (renormalized to
    unit mass), as the integral of the CDF difference."""
    samples = np.sort(np.asarray(samples, dtype=float).ravel())
    if samples.size == 0:
        raise ValueError("empty sample set")
    lo = min(samples[0], rho.x[0])
    hi = max(samples[-1], rho.x[-1])
    z = np.linspace(lo, hi, resolution)
    F_s = np.searchsorted(samples, z, side="right") / samples.size
    F_g = np.interp(z, rho.x, _grid_cdf(rho), left=0.0, right=1.0)
    diff = np.abs(F_s - F_g)
    return float(np.sum(0.5 * (diff[1:] + diff[:-1])) * (z[1] - z[0]))


def density_distance(a: Density1D, b: Density1D, normalize=True) -> DistanceReport:
    """Distances between two densities on the same nodes; ``normalize`` rescales
    both to unit trapezoidal mass first."""
    if a.x.shape != b.x.shape or not np.allclose(a.x, b.x):
        raise ValueError("densities live on different grids")
    fa, fb = a.values, b.values
    if normalize:
        fa = fa / a.mass
        fb = fb / b.mass
    w = trapezoid_weights(a.x.size, a.dx)
    Fa = _grid_cdf(Density1D(a.x, fa))
    Fb = _grid_cdf(Density1D(b.x, fb))
    w1 = float(np.sum(np.abs(Fa - Fb) * w))
    return DistanceReport(w1=w1, l1=float(np.sum(np.abs(fa - fb) * w)), sup=float(np.max(np.abs(fa - fb))))


def loglog_slope(xs, ys) -> float:
    """Least-squares slope of ``log y`` against ``log x``."""
    return float(np.polyfit(np.log(np.asarray(xs, float)), np.log(np.asarray(ys, float)), 1)[0])


def _coupled_positions(objective, config, n_particles, seed, n_steps, checkpoints, init_box):
    rng = RngStream(seed, config.noise)
    swarm = init(objective, config, n_particles, init_box=init_box, rng=rng)
    snaps = []
    for n in range(1, n_steps + 1):
        swarm = step(swarm, objective, config, rng)
        if n in checkpoints:
            snaps.append(swarm.X.copy())
    return snaps


def zero_inertia_rate(objective: Objective, base_config: SolverConfig, m_list, seed,
                      t_final, n_particles=200, n_checkpoints=20, init_box=None):
    """Coupled gap between the inertial system and its zero-inertia limit.

    Both systems start from the same positions with zero velocity and consume
    the same noise draws. Returns ``(m, gap, w1)`` tuples where ``gap`` is the
    sup over checkpoints of ``mean_i |X_i^m - X_i^0|^2`` and ``w1`` compares the
    final position samples coordinate-wise (first coordinate).
    """
    n_steps = int(round(t_final / base_config.dt))
    if n_steps < 1:
        raise ValueError("t_final shorter than one step")
    checkpoints = set(np.linspace(1, n_steps, min(n_checkpoints, n_steps)).round().astype(int).tolist())
    limit_cfg = base_config.replace(mode="sdpso_nomem", m=0.0, gamma=1.0)
    ref = _coupled_positions(objective, limit_cfg, n_particles, seed, n_steps, checkpoints, init_box)
    rows = []
    for m in m_list:
        cfg = base_config.replace(mode="sdpso_nomem", m=float(m))
        snaps = _coupled_positions(objective, cfg, n_particles, seed, n_steps, checkpoints, init_box)
        gap = max(float(np.mean(np.sum((a - b) ** 2, axis=1))) for a, b in zip(snaps, ref))
        w1 = wasserstein1_1d(snaps[-1][:, 0], ref[-1][:, 0])
        rows.append((float(m), gap, w1))
    return rows


def laplace_sweep(values, alpha_list):
    """``(alpha, laplace value, gap to min)`` rows; raises if the gap grows."""
    values = np.asarray(values, dtype=float).ravel()
    alphas = list(alpha_list)
    if any(b <= a for a, b in zip(alphas, alphas[1:])):
        raise ValueError("alpha list must be increasing")
    fmin = float(values.min())
    rows = []
    for a in alphas:
        lv = laplace_value(values, a)
        rows.append((float(a), lv, lv - fmin))
    gaps = [r[2] for r in rows]
    if any(g1 > g0 + 1e-12 * max(1.0, abs(fmin)) for g0, g1 in zip(gaps, gaps[1:])):
        raise ArithmeticError("Laplace gap increased with alpha")
    return rows


def decay_rate_ci(times, H_runs, confidence=0.95):
    """Per-replicate least-squares slope of ``log H`` against time and a
    Student-t confidence interval for the mean slope.

    ``H_runs`` has shape ``(n_runs, n_times)``. Returns ``(mean, lo, hi)``.
    """
    from scipy import stats

    t = np.asarray(times, dtype=float)
    logs = np.log(np.asarray(H_runs, dtype=float))
    tc = t - t.mean()
    slopes = (logs - logs.mean(axis=1, keepdims=True)) @ tc / (tc @ tc)
    n = slopes.size
    mean = float(slopes.mean())
    if n < 2:
        return mean, -math.inf, math.inf
    half = float(stats.t.ppf(0.5 + confidence / 2, n - 1) * slopes.std(ddof=1) / math.sqrt(n))
    return mean, mean - half, mean + half


def write_lyapunov_csv(path, samples):
    with open(path, "w") as fh:
        fh.write("t,H,variance,kinetic,mu\n")
        for s in samples:
            fh.write(f"{s.t!r},{s.H!r},{s.variance!r},{s.kinetic!r},{s.mu!r}\n")
