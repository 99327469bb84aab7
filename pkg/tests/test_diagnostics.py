import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays
from scipy import stats

from mfpso.diagnostics import (
    decay_rate_ci,
    density_distance,
    laplace_sweep,
    loglog_slope,
    lyapunov,
    lyapunov_bounds,
    mu_condition,
    wasserstein1_1d,
    wasserstein1_density,
    write_lyapunov_csv,
    zero_inertia_rate,
)
from mfpso.meanfield import Density1D
from mfpso.objectives import make_objective
from mfpso.swarm import SolverConfig, Swarm

samples = arrays(float, st.integers(1, 30), elements=st.floats(-100, 100))


def swarm(X, V=None):
    X = np.asarray(X, dtype=float)
    return Swarm(X=X, V=np.zeros_like(X) if V is None else np.asarray(V, dtype=float))


def test_lyapunov_examples():
    assert lyapunov(swarm(np.ones((4, 2))), 0.5, 1.0).H == 0.0
    assert lyapunov(swarm([[3.0, 1.0]], [[1.0, 2.0]]), 0.3, 0.7).H == pytest.approx(5.0)
    s = lyapunov(swarm([[-1.0], [1.0]]), 0.5, 1.0)
    assert s.H == pytest.approx(1.0) and s.variance == 1.0 and s.kinetic == 0.0
    with pytest.raises(ValueError):
        lyapunov(swarm([[0.0]]), 0.0, 1.0)


@settings(max_examples=500)
@given(st.integers(0, 2**31), st.floats(0.01, 2.0), st.floats(0.0, 2.0))
def test_lyapunov_bounds(seed, m, gamma):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(rng.integers(1, 30), 3)) * rng.uniform(0.1, 10)
    V = rng.normal(size=X.shape) * rng.uniform(0.1, 10)
    s = lyapunov(swarm(X, V), m, gamma)
    lo, hi = lyapunov_bounds(s, m, gamma)
    scale = max(1.0, hi)
    assert lo - 1e-9 * scale <= s.H <= hi + 1e-9 * scale


def test_mu_examples():
    obj = make_objective("ackley", 3)
    p = obj.minimizer
    sw = swarm(np.tile(p, (5, 1)))
    cfg = SolverConfig(m=0.2, lam=0.1, sigma=0.0, alpha=50.0)
    want = 0.1 * 0.8 / (2 * 0.04) - (2 * 0.01 / (0.8 * 0.2)) * 4
    assert mu_condition(sw, obj, cfg) == pytest.approx(want)
    rng = np.random.default_rng(0)
    sw = swarm(rng.uniform(-3, 3, size=(20, 3)))
    assert mu_condition(sw, obj, cfg.replace(sigma=1e3)) < 0


def test_mu_offset_invariance():
    obj = make_objective("rastrigin", 2)
    rng = np.random.default_rng(1)
    X = rng.uniform(-2, 2, size=(15, 2))
    cfg = SolverConfig(m=0.1, lam=1.0, sigma=0.5, alpha=3.0)

    class Offset:
        def evaluate(self, x, base=obj):
            return base.evaluate(x) + 123.0

    a = mu_condition(swarm(X), obj, cfg)
    b = mu_condition(swarm(X), Offset(), cfg)
    assert a == pytest.approx(b, rel=1e-10)


def test_w1_examples():
    a = np.random.default_rng(0).normal(size=50)
    assert wasserstein1_1d(a, a[::-1]) == 0.0
    assert wasserstein1_1d([2.0], [-1.5]) == 3.5
    u = np.random.default_rng(1).random(20_000)
    v = np.random.default_rng(2).random(20_000) + 0.3
    assert wasserstein1_1d(u, v) == pytest.approx(0.3, abs=0.02)
    with pytest.raises(ValueError):
        wasserstein1_1d([], [1.0])


@settings(max_examples=2000)
@given(samples, samples)
def test_w1_matches_scipy(a, b):
    assert wasserstein1_1d(a, b) == pytest.approx(stats.wasserstein_distance(a, b),
                                                  rel=1e-9, abs=1e-9)


@settings(max_examples=2000)
@given(samples, samples, samples)
def test_w1_triangle(a, b, c):
    ab, bc, ac = wasserstein1_1d(a, b), wasserstein1_1d(b, c), wasserstein1_1d(a, c)
    assert ac <= ab + bc + 1e-12 * max(1.0, ab + bc)
    assert min(ab, bc, ac) >= 0


def test_w1_density_against_discrete_oracle():
    x = np.linspace(-4, 4, 2001)
    rho = Density1D(x, np.exp(-(x - 0.5) ** 2 / 2))
    s = np.random.default_rng(3).normal(size=5000)
    want = stats.wasserstein_distance(s, x, v_weights=rho.values)
    assert wasserstein1_density(s, rho) == pytest.approx(want, abs=5e-3)
    assert wasserstein1_density(s, rho) == pytest.approx(0.5, abs=0.05)


def test_density_distance():
    x = np.linspace(-3, 3, 121)
    a = Density1D(x, np.exp(-x**2))
    b = Density1D(x, 2 * np.exp(-x**2))
    rep = density_distance(a, b)
    assert rep.w1 == pytest.approx(0.0, abs=1e-12) and rep.l1 == pytest.approx(0.0, abs=1e-12)
    assert density_distance(a, b, normalize=False).l1 == pytest.approx(a.mass)
    c = Density1D(x, np.exp(-(x - 0.5) ** 2))
    assert density_distance(a, c).w1 == pytest.approx(0.5, abs=1e-3)
    with pytest.raises(ValueError):
        density_distance(a, Density1D(x[:-1], a.values[:-1]))


def test_loglog_slope():
    xs = np.array([0.1, 0.2, 0.4])
    assert loglog_slope(xs, 3 * xs**1.5) == pytest.approx(1.5)


def test_zero_inertia_gap_is_zero_at_m0():
    obj = make_objective("ackley", 1, domain=(-3, 3))
    cfg = SolverConfig(lam=1.0, sigma=1 / math.sqrt(3), alpha=30.0, dt=0.01)
    rows = zero_inertia_rate(obj, cfg, [0.0, 0.1], seed=1, t_final=0.5, n_particles=50)
    assert rows[0][1] == 0.0 and rows[0][2] == 0.0
    assert rows[1][1] > 0.0


def test_zero_inertia_rate_slope():
    obj = make_objective("ackley", 1, domain=(-3, 3))
    cfg = SolverConfig(lam=1.0, sigma=1 / math.sqrt(3), alpha=30.0, dt=0.01)
    m_list = [0.2, 0.1, 0.05, 0.025]
    rows = zero_inertia_rate(obj, cfg, m_list, seed=3, t_final=1.0, n_particles=200)
    gaps = [g for _, g, _ in rows]
    assert all(g1 < g0 for g0, g1 in zip(gaps, gaps[1:]))
    assert loglog_slope(m_list, gaps) >= 0.8


def test_laplace_sweep():
    vals = np.random.default_rng(0).normal(size=40)
    rows = laplace_sweep(vals, [1, 10, 100, 1e4])
    gaps = [g for _, _, g in rows]
    assert all(b <= a for a, b in zip(gaps, gaps[1:]))
    for a, _, g in rows:
        assert 0 <= g <= math.log(40) / a + 1e-12
    with pytest.raises(ValueError):
        laplace_sweep(vals, [10, 1])


def test_decay_rate_ci_oracle():
    rng = np.random.default_rng(5)
    t = np.linspace(0.1, 5, 50)
    H = np.exp(-0.7 * t + rng.normal(0, 0.05, size=(40, 50)))
    mean, lo, hi = decay_rate_ci(t, H)
    slopes = np.array([np.polyfit(t, np.log(row), 1)[0] for row in H])
    half = stats.t.ppf(0.975, 39) * slopes.std(ddof=1) / math.sqrt(40)
    assert mean == pytest.approx(slopes.mean(), rel=1e-12)
    assert (lo, hi) == pytest.approx((slopes.mean() - half, slopes.mean() + half), rel=1e-10)
    assert lo < -0.7 < hi


def test_lyapunov_csv(tmp_path):
    s = lyapunov(swarm([[-1.0], [1.0]]), 0.5, 1.0, t=0.25, mu=2.0)
    write_lyapunov_csv(tmp_path / "h.csv", [s, s])
    lines = (tmp_path / "h.csv").read_text().splitlines()
    assert lines[0] == "t,H,variance,kinetic,mu" and lines[1].startswith("0.25,1.0")
