import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mfpso.objectives import EvalCounter, make_objective, shift_minimum
from mfpso.swarm import (
    ConfigError,
    DivergenceError,
    RngStream,
    SolverConfig,
    Stopping,
    Swarm,
    init,
    run,
    step,
    step_cbo,
    step_classic,
    step_no_memory,
    step_with_memory,
    write_trajectory,
)


def pair_swarm():
    """Particle 0 at x=0, particle 1 at x=1 with F(1)=0 < F(0)=1."""
    obj = shift_minimum(make_objective("schwefel220", 1, domain=(-3, 3)), 1.0)
    X = np.array([[0.0], [1.0]])
    return obj, Swarm(X=X, V=np.zeros_like(X), FX=obj.evaluate(X))


def test_config_defaults_and_validation():
    c = SolverConfig(m=0.3)
    assert c.gamma == pytest.approx(0.7)
    assert c.replace(m=0.1).gamma == pytest.approx(0.9)
    assert c.replace(m=0.1, gamma=2.0).gamma == 2.0
    with pytest.raises(ConfigError):
        SolverConfig(mode="nope")
    with pytest.raises(ConfigError):
        SolverConfig(dt=0.0)
    with pytest.raises(ConfigError):
        SolverConfig(m=0.0, gamma=0.0)
    with pytest.raises(ConfigError):
        SolverConfig(sigma=-1.0)


def test_init_degenerate_box():
    obj = make_objective("ackley", 3)
    cfg = SolverConfig(mode="cbo_mem")
    p = np.array([0.5, -1.0, 2.0])
    sw = init(obj, cfg, 1, seed=0, init_box=(p, p))
    np.testing.assert_array_equal(sw.X, [p])
    np.testing.assert_array_equal(sw.V, 0.0)
    np.testing.assert_array_equal(sw.P, [p])


def test_init_determinism_and_errors():
    obj = make_objective("ackley", 4)
    cfg = SolverConfig()
    a = init(obj, cfg, 20, seed=3)
    b = init(obj, cfg, 20, seed=3)
    np.testing.assert_array_equal(a.X, b.X)
    with pytest.raises(ConfigError):
        init(obj, cfg, 5, seed=0, init_box=(1.0, -1.0))
    with pytest.raises(ConfigError):
        init(obj, cfg, 0, seed=0)


def test_init_uniform_mean():
    obj = make_objective("ackley", 3, domain=(-3, 3))
    sw = init(obj, SolverConfig(), 10_000, seed=11)
    sd = 6 / math.sqrt(12)
    assert np.all(np.abs(sw.X.mean(axis=0)) < 3 * sd / math.sqrt(10_000))
    assert sw.X.min() >= -3 and sw.X.max() <= 3


def test_no_memory_deterministic_drift():
    obj, sw = pair_swarm()
    cfg = SolverConfig(m=0.0, gamma=1.0, lam=1.0, sigma=0.0, dt=0.01, alpha=math.inf)
    out = step_no_memory(sw, obj, cfg, RngStream(0))
    assert out.V[0, 0] == pytest.approx(1.0)
    assert out.X[0, 0] == pytest.approx(0.01)
    assert out.X[1, 0] == 1.0


def test_no_memory_at_consensus_scales_velocity():
    obj = make_objective("ackley", 1)
    sw = Swarm(X=np.zeros((1, 1)), V=np.ones((1, 1)), FX=obj.evaluate(np.zeros((1, 1))))
    cfg = SolverConfig(m=0.01, gamma=0.99, dt=0.01, lam=5.0, sigma=3.0)
    out = step_no_memory(sw, obj, cfg, RngStream(0))
    assert out.V[0, 0] == pytest.approx(0.01 / (0.01 + 0.0099), rel=1e-14)
    assert out.V[0, 0] == pytest.approx(0.50251, abs=1e-5)


def test_memory_frozen_when_nu_zero():
    obj = make_objective("rastrigin", 2)
    cfg = SolverConfig(mode="sdpso_mem", m=0.2, nu=0.0, sigma2=2.0)
    rng = RngStream(4)
    sw = init(obj, cfg, 15, rng=rng)
    P0 = sw.P.copy()
    for _ in range(20):
        sw = step(sw, obj, cfg, rng)
    np.testing.assert_array_equal(sw.P, P0)


def test_memory_full_replacement():
    obj, sw = pair_swarm()
    sw.P = np.array([[2.5], [2.0]])
    sw.FP = obj.evaluate(sw.P)
    sw.X = np.array([[0.9], [1.1]])
    cfg = SolverConfig(mode="sdpso_mem", m=0.0, gamma=1.0, lam2=0.0, sigma2=0.0,
                       beta=1e6, nu=50.0, dt=0.01)
    out = step_with_memory(sw, obj, cfg, RngStream(0))
    np.testing.assert_allclose(out.P, out.X, atol=1e-12)


def test_memory_without_local_terms_matches_memoryless():
    obj = make_objective("ackley", 3)
    base = dict(m=0.2, alpha=10.0, dt=0.05)
    mem = SolverConfig(mode="sdpso_mem", lam1=0.0, sigma1=0.0, lam2=1.3, sigma2=0.8, **base)
    nom = SolverConfig(mode="sdpso_nomem", lam=1.3, sigma=0.8, **base)
    sw = init(obj, mem, 12, seed=1)
    sw.V = np.random.default_rng(2).normal(size=sw.X.shape)
    a = step_with_memory(sw, obj, mem, RngStream(9))
    rng = RngStream(9)
    rng.theta(sw.X.shape)  # the memory stepper draws the local-best noise first
    b = step_no_memory(sw, obj, nom, rng)
    np.testing.assert_allclose(a.X, b.X, rtol=0, atol=1e-14)
    np.testing.assert_allclose(a.V, b.V, rtol=0, atol=1e-14)


def test_cbo_full_contraction():
    obj = make_objective("ackley", 2)
    cfg = SolverConfig(mode="cbo_mem", lam1=0.0, sigma1=0.0, sigma2=0.0, lam2=100.0, dt=0.01)
    sw = init(obj, cfg, 8, seed=0)
    G = sw.consensus.copy()
    out = step_cbo(sw, obj, cfg, RngStream(0))
    np.testing.assert_allclose(out.X, np.tile(G, (8, 1)), atol=1e-14)


def test_memory_zero_inertia_matches_cbo():
    obj = make_objective("rastrigin", 4)
    kw = dict(lam1=0.4, sigma1=0.7, lam2=1.0, sigma2=2.0, alpha=100.0, dt=0.01)
    mem = SolverConfig(mode="sdpso_mem", m=0.0, gamma=1.0, **kw)
    cbo = SolverConfig(mode="cbo_mem", **kw)
    sw = init(obj, mem, 30, seed=5)
    a = step_with_memory(sw, obj, mem, RngStream(8))
    b = step_cbo(sw, obj, cbo, RngStream(8))
    scale = float(np.abs(sw.X).max())
    assert np.max(np.abs(a.X - b.X)) <= mem.dt * scale


def test_classic_free_drift_and_fixed_point():
    obj = make_objective("ackley", 2)
    cfg = SolverConfig(mode="classic_pso", c1=0.0, c2=0.0)
    sw = init(obj, cfg, 5, seed=0)
    sw.V = np.random.default_rng(0).normal(size=sw.X.shape)
    out = step_classic(sw, obj, cfg, RngStream(1))
    np.testing.assert_allclose(out.X, sw.X + sw.V)

    cfg = SolverConfig(mode="classic_pso_inertia", m=0.6, c1=2.0, c2=2.0)
    p = np.array([0.3, 0.3])
    sw = init(obj, cfg, 4, seed=0, init_box=(p, p))
    sw.V = np.ones_like(sw.X)
    out = step_classic(sw, obj, cfg, RngStream(1))
    np.testing.assert_allclose(out.V, 0.6 * sw.V)


@pytest.mark.parametrize("w,c1,c2", [(0.7, 1.5, 1.8), (0.0, 2.0, 2.0), (0.9, 0.5, 2.5)])
def test_classic_recovery(w, c1, c2):
    obj = make_objective("rastrigin", 5)
    mem = SolverConfig.from_classic(c1, c2, w)
    assert mem.m / (mem.m + mem.gamma * mem.dt) == pytest.approx(w, abs=1e-15)
    cls = SolverConfig(mode="classic_pso_inertia", m=w, c1=c1, c2=c2, noise="uniform")
    rng = np.random.default_rng(0)
    X = rng.uniform(obj.lo, obj.hi, size=(10, 5))
    V = rng.uniform(-1, 1, size=X.shape)
    F = obj.evaluate(X)
    a = Swarm(X=X, V=V, P=X.copy(), FX=F, FP=F.copy())
    b = a.copy()
    ra, rb = RngStream(3, "uniform"), RngStream(3, "uniform")
    for _ in range(100):
        a = step_with_memory(a, obj, mem, ra)
        b = step_classic(b, obj, cls, rb)
    scale = max(1.0, float(np.abs(b.X).max()))
    assert np.max(np.abs(a.X - b.X)) <= 1e-12 * scale
    np.testing.assert_allclose(a.P, b.P, rtol=0, atol=1e-12 * scale)


ALL_MODES = ["sdpso_nomem", "sdpso_mem", "cbo_mem", "classic_pso", "classic_pso_inertia"]


@pytest.mark.parametrize("mode", ALL_MODES)
def test_consensus_fixed_point(mode):
    obj = make_objective("rastrigin", 3)
    cfg = SolverConfig(mode=mode, m=0.3, sigma=4.0, sigma1=1.0, sigma2=4.0, lam1=0.5)
    p = np.array([1.2, -0.4, 0.1])
    rng = RngStream(0, cfg.noise)
    sw = init(obj, cfg, 6, init_box=(p, p), rng=rng)
    for _ in range(10):
        sw = step(sw, obj, cfg, rng)
    np.testing.assert_array_equal(sw.X, np.tile(p, (6, 1)))
    if sw.P is not None:
        np.testing.assert_array_equal(sw.P, np.tile(p, (6, 1)))


@settings(max_examples=200)
@given(st.floats(-2, 2), st.integers(0, 2**31))
def test_translation_equivariance(c, seed):
    base = make_objective("rastrigin", 2, domain=(-10, 10))
    moved = shift_minimum(base, c)
    cfg = SolverConfig(m=0.1, sigma=2.0, alpha=20.0)
    sw = init(base, cfg, 7, seed=seed, init_box=(-3, 3))
    sw.V = np.random.default_rng(seed).normal(size=sw.X.shape)
    tw = Swarm(X=sw.X + c, V=sw.V.copy(), FX=moved.evaluate(sw.X + c))
    a = step_no_memory(sw, base, cfg, RngStream(seed))
    b = step_no_memory(tw, moved, cfg, RngStream(seed))
    np.testing.assert_allclose(b.X - c, a.X, atol=1e-9)
    np.testing.assert_allclose(b.V, a.V, atol=1e-9)


@pytest.mark.parametrize("kind", ["gaussian", "uniform"])
def test_noise_moments(kind):
    rng = RngStream(21, kind)
    draws = np.concatenate([rng.theta((50, 4)) for _ in range(500)])
    n = draws.shape[0]
    assert np.all(np.abs(draws.mean(axis=0)) < 3 / math.sqrt(n))
    # variance of the sample variance: (mu4 - 1)/n; mu4 = 3 (normal), 9/5 (uniform)
    mu4 = 3.0 if kind == "gaussian" else 1.8
    assert np.all(np.abs(draws.var(axis=0) - 1) < 3 * math.sqrt((mu4 - 1) / n))


def test_run_degenerate_stops_after_stall():
    obj = make_objective("ackley", 2)
    p = obj.minimizer
    cfg = SolverConfig(mode="sdpso_nomem", sigma=1.0)
    res = run(obj, cfg, 5, seed=0, stopping=Stopping(1e-4, 37, 1000), init_box=(p, p))
    assert res.n_iter == 37
    assert res.value == pytest.approx(0.0, abs=1e-12)


def test_run_determinism_and_eval_count():
    obj = make_objective("ackley", 4)
    cfg = SolverConfig(mode="sdpso_mem", sigma2=3.0)
    stop = Stopping(n_max=150)
    a = run(obj, cfg, 20, seed=12, stopping=stop)
    b = run(obj, cfg, 20, seed=12, stopping=stop)
    np.testing.assert_array_equal(a.point, b.point)
    assert (a.value, a.n_iter, a.n_evals) == (b.value, b.n_iter, b.n_evals)
    assert a.n_evals >= 20 * (a.n_iter + 1)


def test_run_ackley_table_setting():
    obj = make_objective("ackley", 20, domain=(-3, 3))
    cfg = SolverConfig(m=0.0, gamma=1.0, lam=1.0, sigma=9.0, dt=0.01, alpha=5e4)
    res = run(obj, cfg, 100, seed=2024)
    assert np.max(np.abs(res.point)) < 0.25


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_reported():
    obj = make_objective("ackley", 2)
    cfg = SolverConfig(sigma=1e300, alpha=0.0)
    res = run(obj, cfg, 10, seed=0, stopping=Stopping(n_max=50))
    assert res.diverged and math.isnan(res.value)
    with pytest.raises(DivergenceError) as info:
        rng = RngStream(0)
        sw = init(obj, cfg, 10, rng=rng)
        for _ in range(50):
            sw = step(sw, obj, cfg, rng)
    assert info.value.step_index >= 1


def test_trajectory_csv(tmp_path):
    obj = make_objective("ackley", 2)
    res = run(obj, SolverConfig(), 10, seed=0, stopping=Stopping(n_max=5), trace=True)
    path = tmp_path / "t.csv"
    write_trajectory(path, res.trajectory, 2)
    lines = path.read_text().splitlines()
    assert len(lines) == 6
    assert lines[0].startswith("step,")


def test_counter_monotone_over_run():
    obj = make_objective("ackley", 2)
    cfg = SolverConfig(mode="cbo_mem")
    c = EvalCounter()
    rng = RngStream(0)
    sw = init(obj, cfg, 10, rng=rng, counter=c)
    seen = [c.count]
    for _ in range(10):
        sw = step(sw, obj, cfg, rng, counter=c)
        seen.append(c.count)
    assert all(b >= a for a, b in zip(seen, seen[1:]))
