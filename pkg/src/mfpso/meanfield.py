"""One-dimensional mean-field solvers.

Three equations are covered:

* the kinetic PSO equation for ``f(t, x, v)`` (:func:`mf_pso_step`),
* the kinetic PSO equation with a local-best variable ``f(t, x, y, v)``
  (:func:`mf_pso_memory_step`),
* the first-order consensus (CBO) equation for ``rho(t, x)``
  (:func:`mf_cbo_step`).

Grids are node-based and include the end points of each interval. End-point
nodes act as the zero boundary condition: they are held at zero after every
sub-step, so the trapezoidal mass equals the sum over interior nodes times the
cell volume, which every sub-step conserves up to boundary outflow.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .consensus import global_best, smooth_switch
from .objectives import Objective

__all__ = [
    "PhaseGrid",
    "PhaseDensity",
    "Density1D",
    "MFParams",
    "SchemeError",
    "CFLError",
    "uniform_density",
    "uniform_density_1d",
    "trapezoid_weights",
    "marginal_x",
    "marginal_y",
    "grid_consensus",
    "maxwellian",
    "solve_tridiagonal",
    "transport_x",
    "fokker_planck_v",
    "advect_y",
    "mf_pso_step",
    "mf_pso_memory_step",
    "mf_cbo_step",
    "admissible_dt",
    "kde",
    "write_density",
    "read_density",
    "write_marginal",
]

MASS_TOL = 1e-10
NEG_TOL = -1e-12


class SchemeError(RuntimeError):
    pass


class CFLError(SchemeError):
    def __init__(self, cfl, admissible):
        super().__init__(f"y-advection CFL number {cfl:.3f} exceeds 0.9; use dt <= {admissible:.6g}")
        self.cfl = cfl
        self.admissible_dt = admissible


@dataclass(frozen=True)
class PhaseGrid:
    """Uniform node grid on ``[x_lo, x_hi] x [v_lo, v_hi]`` (plus ``y`` when
    ``with_y``; the y-grid copies the x-grid unless overridden)."""

    nx: int = 90
    nv: int = 120
    x_lo: float = -3.0
    x_hi: float = 3.0
    v_lo: float = -4.0
    v_hi: float = 4.0
    dt: float = 0.01
    with_y: bool = False
    ny: Optional[int] = None
    y_lo: Optional[float] = None
    y_hi: Optional[float] = None

    def __post_init__(self):
        if self.ny is None:
            object.__setattr__(self, "ny", self.nx)
        if self.y_lo is None:
            object.__setattr__(self, "y_lo", self.x_lo)
        if self.y_hi is None:
            object.__setattr__(self, "y_hi", self.x_hi)
        if min(self.nx, self.nv, self.ny) < 3:
            raise ValueError("grids need at least 3 nodes per direction")
        if not (self.x_lo < self.x_hi and self.v_lo < self.v_hi and self.y_lo < self.y_hi):
            raise ValueError("empty grid interval")
        if not self.dt > 0:
            raise ValueError("dt must be positive")

    @property
    def x(self):
        return np.linspace(self.x_lo, self.x_hi, self.nx)

    @property
    def v(self):
        return np.linspace(self.v_lo, self.v_hi, self.nv)

    @property
    def y(self):
        return np.linspace(self.y_lo, self.y_hi, self.ny)

    @property
    def dx(self):
        return (self.x_hi - self.x_lo) / (self.nx - 1)

    @property
    def dv(self):
        return (self.v_hi - self.v_lo) / (self.nv - 1)

    @property
    def dy(self):
        return (self.y_hi - self.y_lo) / (self.ny - 1)

    @property
    def shape(self):
        return (self.nx, self.ny, self.nv) if self.with_y else (self.nx, self.nv)


def trapezoid_weights(n, h):
    w = np.full(n, h)
    w[0] = w[-1] = 0.5 * h
    return w


@dataclass
class PhaseDensity:
    values: np.ndarray
    grid: PhaseGrid
    time: float = 0.0

    def __post_init__(self):
        if self.values.shape != self.grid.shape:
            raise ValueError(f"values shape {self.values.shape} != grid shape {self.grid.shape}")

    @property
    def mass(self) -> float:
        return float(np.sum(marginal_x(self).values * trapezoid_weights(self.grid.nx, self.grid.dx)))

    def copy(self):
        return PhaseDensity(self.values.copy(), self.grid, self.time)


@dataclass
class Density1D:
    x: np.ndarray
    values: np.ndarray
    time: float = 0.0
    dt: float = 0.01

    @property
    def dx(self):
        return self.x[1] - self.x[0]

    @property
    def mass(self) -> float:
        return float(np.sum(self.values * trapezoid_weights(self.x.size, self.dx)))

    def copy(self):
        return Density1D(self.x.copy(), self.values.copy(), self.time, self.dt)


@dataclass(frozen=True)
class MFParams:
    """Coefficients of the mean-field equations.

    ``flux`` selects the velocity-diffusion flux weighting: ``"chang_cooper"``
    (positive for any grid Peclet number) or ``"central"``. ``limiter`` turns
    the minmod limiter of the Lax-Wendroff y-advection on or off.
    """

    m: float = 0.5
    gamma: Optional[float] = None
    lam: float = 1.0
    sigma: float = 1.0 / math.sqrt(3.0)
    alpha: float = 30.0
    lam1: float = 0.0
    sigma1: float = 0.0
    lam2: float = 1.0
    sigma2: float = 1.0 / math.sqrt(3.0)
    nu: float = 0.5
    beta: float = 30.0
    flux: str = "chang_cooper"
    limiter: bool = True

    def __post_init__(self):
        if self.gamma is None:
            object.__setattr__(self, "gamma", 1.0 - self.m)
        if self.flux not in ("chang_cooper", "central"):
            raise ValueError(f"unknown flux {self.flux!r}")

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


def _pin_boundary(values, axes):
    for ax in axes:
        idx = [slice(None)] * values.ndim
        idx[ax] = 0
        values[tuple(idx)] = 0.0
        idx[ax] = -1
        values[tuple(idx)] = 0.0
    return values


def uniform_density(grid: PhaseGrid) -> PhaseDensity:
    """Uniform datum on the computational box with unit trapezoidal mass."""
    values = np.ones(grid.shape)
    _pin_boundary(values, range(values.ndim))
    f = PhaseDensity(values, grid)
    f.values /= f.mass
    return f


def uniform_density_1d(x_lo=-3.0, x_hi=3.0, nx=120, dt=0.01) -> Density1D:
    x = np.linspace(x_lo, x_hi, nx)
    values = np.ones(nx)
    values[0] = values[-1] = 0.0
    rho = Density1D(x, values, dt=dt)
    rho.values /= rho.mass
    return rho


def marginal_x(f: PhaseDensity) -> Density1D:
    """Integrate out ``v`` (and ``y``) with the trapezoidal rule."""
    g = f.grid
    rho = f.values @ trapezoid_weights(g.nv, g.dv)
    if g.with_y:
        rho = rho @ trapezoid_weights(g.ny, g.dy)
    return Density1D(g.x, rho, f.time, g.dt)


def marginal_y(f: PhaseDensity) -> Density1D:
    g = f.grid
    if not g.with_y:
        raise ValueError("density has no y variable")
    rho = f.values @ trapezoid_weights(g.nv, g.dv)
    rho = trapezoid_weights(g.nx, g.dx) @ rho
    return Density1D(g.y, rho, f.time, g.dt)


def _objective_on_nodes(objective, nodes):
    return np.asarray(objective.evaluate(np.asarray(nodes, dtype=float)[:, None]), dtype=float)


def grid_consensus(nodes, density, fvalues, alpha):
    """Softmin consensus of the grid measure ``density * trapezoid weights``."""
    nodes = np.asarray(nodes, dtype=float)
    w = np.clip(density, 0.0, None) * trapezoid_weights(nodes.size, nodes[1] - nodes[0])
    return float(global_best(nodes[:, None], fvalues, alpha, weights=w)[0])


def maxwellian(x, v, consensus, m, sigma, gamma=1.0, lam=0.0):
    """Unit-mass Gaussian in ``v`` annihilated by the velocity Fokker-Planck
    operator with frozen consensus; for ``gamma=1, lam=0`` this is the local
    Maxwellian with variance ``sigma^2 (x - consensus)^2 / (2 m)``."""
    x = np.asarray(x, dtype=float)[..., None]
    v = np.asarray(v, dtype=float)
    dist = x - consensus
    var = sigma**2 * dist**2 / (2.0 * m * gamma)
    mean = -(lam / gamma) * dist
    return np.exp(-((v - mean) ** 2) / (2.0 * var)) / np.sqrt(2.0 * np.pi * var)


def solve_tridiagonal(lower, diag, upper, rhs):
    """Thomas algorithm along the last axis, batched over leading axes.

    ``lower[..., 0]`` and ``upper[..., -1]`` are ignored. Intended for
    diagonally dominant (M-matrix) systems, which need no pivoting.
    """
    lower, diag, upper, rhs = np.broadcast_arrays(lower, diag, upper, rhs)
    n = rhs.shape[-1]
    c = np.empty(rhs.shape)
    d = np.empty(rhs.shape)
    c[..., 0] = upper[..., 0] / diag[..., 0]
    d[..., 0] = rhs[..., 0] / diag[..., 0]
    for i in range(1, n):
        denom = diag[..., i] - lower[..., i] * c[..., i - 1]
        c[..., i] = upper[..., i] / denom
        d[..., i] = (rhs[..., i] - lower[..., i] * d[..., i - 1]) / denom
    out = np.empty(rhs.shape)
    out[..., -1] = d[..., -1]
    for i in range(n - 2, -1, -1):
        out[..., i] = d[..., i] - c[..., i] * out[..., i + 1]
    return out


def transport_x(values, x, v, dt):
    """Backward semi-Lagrangian shift ``f(x - v dt, v)`` with linear
    interpolation; ``values`` has x on axis 0 and v on the last axis."""
    nx, nv = values.shape[0], values.shape[-1]
    dx = x[1] - x[0]
    # departure points in cell units; exact for zero speed
    pos = np.arange(nx, dtype=float)[:, None] - (v[None, :] * dt) / dx
    k = np.floor(pos).astype(np.int64)
    th = pos - k
    shape = (nx,) + (1,) * (values.ndim - 2) + (nv,)
    k = k.reshape(shape)
    th = th.reshape(shape)
    out = np.zeros(values.shape)
    for offset, weight in ((0, 1.0 - th), (1, th)):
        idx = k + offset
        ok = (idx >= 0) & (idx < nx)
        src = np.take_along_axis(values, np.clip(idx, 0, nx - 1), axis=0)
        out += np.where(ok, weight * src, 0.0)
    return _pin_boundary(out, [0])


def _flux_coefficients(B, C, h, flux):
    """Interface flux ``F = a f_j + b f_{j+1}`` for ``F = B f + C df/dv``."""
    D = C / h
    if flux == "central":
        return 0.5 * B - D, 0.5 * B + D
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        w = h * B / C
        small = np.abs(w) < 1e-8
        a = np.where(small, -D * (1.0 - 0.5 * w), -B / np.expm1(w))
        b = np.where(small, D * (1.0 + 0.5 * w), -B / np.expm1(-w))
    # C == 0: pure upwind
    zero_c = C == 0
    if np.any(zero_c):
        a = np.where(zero_c, np.minimum(B, 0.0), a)
        b = np.where(zero_c, np.maximum(B, 0.0), b)
    return a, b


def _implicit_flux_solve(values, a, b, h, dt):
    """One implicit Euler step of ``df/dt = d/ds F`` along the last axis with
    end nodes pinned to zero. ``a``/``b`` hold interface coefficients."""
    r = dt / h
    lower = r * a[..., :-1]
    diag = 1.0 - r * (a[..., 1:] - b[..., :-1])
    upper = -r * b[..., 1:]
    out = np.zeros(values.shape)
    out[..., 1:-1] = solve_tridiagonal(lower, diag, upper, values[..., 1:-1])
    return out


def fokker_planck_v(values, v, drift_offset, diffusion, gamma_over_m, dt, flux="chang_cooper"):
    """Implicit step of ``df/dt = d/dv (B f + C df/dv)`` along the last axis
    with ``B = gamma_over_m v + drift_offset`` and ``C = diffusion``.

    ``drift_offset`` and ``diffusion`` broadcast against ``values[..., :1]``.
    """
    h = v[1] - v[0]
    v_half = 0.5 * (v[:-1] + v[1:])
    B = gamma_over_m * v_half + drift_offset
    C = np.broadcast_to(diffusion, B.shape) if np.ndim(diffusion) else np.full(B.shape, diffusion)
    a, b = _flux_coefficients(B, C, h, flux)
    return _implicit_flux_solve(values, a, b, h, dt)


def _minmod(p, q):
    return np.where(p * q > 0, np.sign(p) * np.minimum(np.abs(p), np.abs(q)), 0.0)


def admissible_dt(grid: PhaseGrid, objective, params: MFParams, cfl=0.9):
    """Largest dt keeping the y-advection CFL number at ``cfl``."""
    speed = _y_speed(grid, objective, params)
    vmax = float(np.max(np.abs(speed)))
    return math.inf if vmax == 0 else cfl * grid.dy / vmax


def _y_speed(grid, objective, params):
    x = grid.x
    y = grid.y
    y_half = 0.5 * (y[:-1] + y[1:])
    fx = _objective_on_nodes(objective, x)
    fy = _objective_on_nodes(objective, y_half)
    S = smooth_switch(fx[:, None], fy[None, :], params.beta)
    return params.nu * (x[:, None] - y_half[None, :]) * S


def advect_y(values, grid, speed, dt, limiter=True):
    """Flux-form Lax-Wendroff step for ``df/dt + d/dy (a f) = 0`` along axis 1.

    ``speed`` holds interface velocities with shape ``(nx, ny - 1)``. With the
    minmod limiter the update is positive for CFL numbers up to one.
    """
    dy = grid.dy
    c = speed * dt / dy
    cfl = float(np.max(np.abs(c))) if c.size else 0.0
    if cfl > 0.9 + 1e-12:
        raise CFLError(cfl, 0.9 * dy / float(np.max(np.abs(speed))))
    f = values
    ny = f.shape[1]
    padded = np.zeros((f.shape[0], ny + 2) + f.shape[2:])
    padded[:, 1:-1] = f
    delta = np.diff(padded, axis=1)  # delta[:, k] = f_k - f_{k-1}, k = 0..ny
    c = c[:, :, None]
    fl = f[:, :-1]
    fr = f[:, 1:]
    if limiter:
        slope_left = _minmod(delta[:, 0:ny - 1], delta[:, 1:ny])
        slope_right = _minmod(delta[:, 1:ny], delta[:, 2:ny + 1])
    else:
        slope_left = slope_right = delta[:, 1:ny]
    face_pos = fl + 0.5 * (1.0 - c) * slope_left
    face_neg = fr - 0.5 * (1.0 + c) * slope_right
    flux = speed[:, :, None] * np.where(c > 0, face_pos, face_neg)
    out = f.copy()
    out[:, 1:-1] -= (dt / dy) * (flux[:, 1:] - flux[:, :-1])
    return _pin_boundary(out, [1])


def _check_scheme(before_mass, after: PhaseDensity | Density1D):
    if after.mass > before_mass + MASS_TOL:
        raise SchemeError(f"mass increased from {before_mass!r} to {after.mass!r}")
    if after.values.min() < NEG_TOL:
        raise SchemeError(f"negative density {after.values.min():.3e}")


def mf_pso_step(f: PhaseDensity, objective: Objective, params: MFParams,
                consensus: Optional[float] = None) -> PhaseDensity:
    """One Lie-split step: x-transport, then implicit velocity Fokker-Planck.

    The consensus point is computed from the x-marginal at the start of the
    step unless ``consensus`` freezes it.
    """
    g = f.grid
    if params.m <= 0:
        raise ValueError("the kinetic equation needs m > 0")
    x, v = g.x, g.v
    if consensus is None:
        rho = marginal_x(f)
        consensus = grid_consensus(x, rho.values, _objective_on_nodes(objective, x), params.alpha)
    mass0 = f.mass
    vals = transport_x(f.values, x, v, g.dt)
    m = params.m
    dist = x - consensus
    drift = (params.lam / m) * dist
    diff = (params.sigma**2 / (2.0 * m * m)) * dist**2
    if g.with_y:
        drift = drift[:, None, None]
        diff = diff[:, None, None]
    else:
        drift = drift[:, None]
        diff = diff[:, None]
    vals = fokker_planck_v(vals, v, drift, diff, params.gamma / m, g.dt, params.flux)
    _pin_boundary(vals, range(vals.ndim))
    out = PhaseDensity(vals, g, round(f.time + g.dt, 12))
    _check_scheme(mass0, out)
    return out


def mf_pso_memory_step(f: PhaseDensity, objective: Objective, params: MFParams,
                       consensus: Optional[float] = None) -> PhaseDensity:
    """One step for the density over ``(x, y, v)``: x-transport, velocity
    Fokker-Planck, then Lax-Wendroff advection of the local best ``y``."""
    g = f.grid
    if not g.with_y:
        raise ValueError("memory solver needs a grid with a y variable")
    if params.m <= 0:
        raise ValueError("the kinetic equation needs m > 0")
    x, y, v = g.x, g.y, g.v
    speed = _y_speed(g, objective, params)
    if consensus is None:
        rho_y = marginal_y(f)
        consensus = grid_consensus(y, rho_y.values, _objective_on_nodes(objective, y), params.alpha)
    mass0 = f.mass
    vals = transport_x(f.values, x, v, g.dt)
    m = params.m
    xg = x[:, None, None]
    yg = y[None, :, None]
    drift = (params.lam1 * (xg - yg) + params.lam2 * (xg - consensus)) / m
    diff = (params.sigma2**2 * (xg - consensus) ** 2 + params.sigma1**2 * (xg - yg) ** 2) / (2.0 * m * m)
    vals = fokker_planck_v(vals, v, drift, diff, params.gamma / m, g.dt, params.flux)
    if params.nu != 0:
        vals = advect_y(vals, g, speed, g.dt, params.limiter)
    _pin_boundary(vals, range(vals.ndim))
    out = PhaseDensity(vals, g, round(f.time + g.dt, 12))
    if params.limiter:
        _check_scheme(mass0, out)
    elif out.mass > mass0 + MASS_TOL:
        raise SchemeError("mass increased")
    return out


def mf_cbo_step(rho: Density1D, objective: Objective, params: MFParams,
                consensus: Optional[float] = None) -> Density1D:
    """Implicit step of the mean-field CBO equation
    ``d rho/dt = d/dx (lam (x - X) rho) + sigma^2/2 d^2/dx^2 ((x - X)^2 rho)``.

    Drift is upwinded and the diffusion is centred; the resulting matrix is an
    M-matrix, so the step is positive and mass-conserving up to outflow.
    """
    x = rho.x
    h = rho.dx
    if consensus is None:
        consensus = grid_consensus(x, rho.values, _objective_on_nodes(objective, x), params.alpha)
    x_half = 0.5 * (x[:-1] + x[1:])
    B = params.lam * (x_half - consensus)
    Cn = 0.5 * params.sigma**2 * (x - consensus) ** 2
    # flux = B rho_upwind + (C_{j+1} rho_{j+1} - C_j rho_j) / h
    a = np.minimum(B, 0.0) - Cn[:-1] / h
    b = np.maximum(B, 0.0) + Cn[1:] / h
    mass0 = rho.mass
    vals = _implicit_flux_solve(rho.values, a, b, h, rho.dt)
    out = Density1D(x, vals, round(rho.time + rho.dt, 12), rho.dt)
    _check_scheme(mass0, out)
    return out


def kde(samples, nodes, bandwidth=None, chunk=20_000):
    """Gaussian kernel density estimate on ``nodes`` normalized to unit
    trapezoidal mass over the node window.

    The default bandwidth is Silverman's ``1.06 std N^(-1/5)``, floored at
    half the node spacing so that coincident samples stay resolvable.
    """
    samples = np.asarray(samples, dtype=float).ravel()
    nodes = np.asarray(nodes, dtype=float)
    if samples.size < 2:
        raise ValueError("kde needs at least two samples")
    spacing = nodes[1] - nodes[0]
    if bandwidth is None:
        bandwidth = 1.06 * samples.std() * samples.size ** (-0.2)
        bandwidth = max(bandwidth, 0.5 * spacing)
    dens = np.zeros(nodes.size)
    for start in range(0, samples.size, chunk):
        s = samples[start:start + chunk]
        z = (nodes[:, None] - s[None, :]) / bandwidth
        dens += np.exp(-0.5 * z * z).sum(axis=1)
    dens /= samples.size * bandwidth * math.sqrt(2.0 * math.pi)
    mass = float(np.sum(dens * trapezoid_weights(nodes.size, spacing)))
    if mass > 0:
        dens /= mass
    return Density1D(nodes.copy(), dens)


def write_density(path, f: PhaseDensity):
    """Plain-text dump: one header line, then the values in row-major order.

    Header: ``nx nv [ny] x_lo x_hi v_lo v_hi [y_lo y_hi] t mass``.
    """
    g = f.grid
    if g.with_y:
        head = [g.nx, g.nv, g.ny, g.x_lo, g.x_hi, g.v_lo, g.v_hi, g.y_lo, g.y_hi, f.time, f.mass]
    else:
        head = [g.nx, g.nv, g.x_lo, g.x_hi, g.v_lo, g.v_hi, f.time, f.mass]
    with open(path, "w") as fh:
        fh.write(" ".join(repr(h) if isinstance(h, float) else str(h) for h in head) + "\n")
        np.savetxt(fh, f.values.reshape(-1, g.nv), fmt="%.17g")


def read_density(path, dt=0.01) -> PhaseDensity:
    with open(path) as fh:
        head = fh.readline().split()
        data = np.loadtxt(fh, ndmin=2)
    if len(head) == 11:
        nx, nv, ny = (int(h) for h in head[:3])
        x_lo, x_hi, v_lo, v_hi, y_lo, y_hi, t = (float(h) for h in head[3:10])
        grid = PhaseGrid(nx=nx, nv=nv, ny=ny, x_lo=x_lo, x_hi=x_hi, v_lo=v_lo, v_hi=v_hi,
                         y_lo=y_lo, y_hi=y_hi, with_y=True, dt=dt)
    elif len(head) == 8:
        nx, nv = int(head[0]), int(head[1])
        x_lo, x_hi, v_lo, v_hi, t = (float(h) for h in head[2:7])
        grid = PhaseGrid(nx=nx, nv=nv, x_lo=x_lo, x_hi=x_hi, v_lo=v_lo, v_hi=v_hi, dt=dt)
    else:
        raise ValueError(f"{path}: malformed density header")
    return PhaseDensity(data.reshape(grid.shape), grid, t)


def write_marginal(path, rho: Density1D):
    """Two-column CSV ``x,rho``."""
    with open(path, "w") as fh:
        fh.write("x,rho\n")
        for xi, ri in zip(rho.x, rho.values):
            fh.write(f"{xi!r},{ri!r}\n")
