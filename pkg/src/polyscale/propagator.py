"""Moments of the fundamental solution ``p_beta(t, 0, x)`` and the polymer radius.

``p_beta = p_0 + u`` where ``p_0`` is the free heat kernel (kept analytic) and
``u`` solves ``u_t = (1/2) Lap u + beta v u + beta v p_0`` with ``u(0) = 0``.
The radial problem is solved for ``w = r u`` by Crank-Nicolson on a
sinh-stretched grid that is fine over the potential and coarse in the far
field. A Feynman-Kac Monte-Carlo estimator provides an independent check.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np
from numba import njit

from . import spectral
from .errors import BracketError, DomainError, ResolutionError, WindowError
from .potential import Potential
from .regime import classify_regime

MAX_REACTION_STEP = 0.1  # max(beta v) * dt
RANNACHER_STEPS = 4
GRADING = 1.2
BOUNDARY_TOL = 1e-12
MC_BLOCK = 25_000
MC_REPLICAS = 20
MC_METHODS = ("resampled", "plain")
MOMENT_HEADER = ("beta", "t", "Z", "m0", "m2", "r", "gamma", "chi", "regime")


@dataclass(frozen=True)
class SolverConfig:
    dr: float = 0.01
    dt: float = 0.05
    domain_factor: float = 8.0
    mc_paths: int = 100_000
    mc_step: float | None = None
    seed: int = 20240611
    mc_method: str = "resampled"
    check_convergence: bool = False
    convergence_tol: float = 2e-3

    def __post_init__(self) -> None:
        if not self.dr > 0:
            raise ValueError(f"dr must be positive, got {self.dr}")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.domain_factor >= 4:
            raise ValueError(f"domain_factor must be >= 4, got {self.domain_factor}")
        if self.mc_paths < 1000:
            raise ValueError(f"mc_paths must be >= 1000, got {self.mc_paths}")
        if self.mc_step is not None and not self.mc_step > 0:
            raise ValueError(f"mc_step must be positive, got {self.mc_step}")
        if self.mc_method not in MC_METHODS:
            raise ValueError(f"mc_method must be one of {MC_METHODS}, got {self.mc_method!r}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    def coarsened(self, factor: float = 2.0) -> "SolverConfig":
        return replace(self, dr=self.dr * factor, dt=self.dt * factor, check_convergence=False)


@dataclass(frozen=True)
class MomentRecord:
    beta: float
    t: float
    Z: float
    m0: float
    m2: float
    r: float
    gamma: float
    chi: float
    regime: str

    def as_row(self) -> tuple:
        return tuple(getattr(self, name) for name in MOMENT_HEADER)


@dataclass(frozen=True)
class McEstimate:
    mean: float
    stderr: float
    n_paths: int


@dataclass(frozen=True)
class McResult:
    Z: McEstimate
    m2: McEstimate
    r: float
    r_stderr: float


@dataclass(frozen=True)
class RadialSolution:
    """``u(t, r)`` on the radial grid plus weights for ``integral_0^R f(r) dr``."""

    r: np.ndarray
    u: np.ndarray
    weights: np.ndarray
    beta: float
    t: float

    def moment(self, nu: int) -> float:
        """``integral over R^3 of |x|^nu u dx``."""
        return 4.0 * math.pi * float(np.sum(self.weights * self.r ** (2 + nu) * self.u))


@dataclass(frozen=True)
class EndpointDensity:
    r: np.ndarray
    q: np.ndarray
    weights: np.ndarray

    def total(self) -> float:
        return 4.0 * math.pi * float(np.sum(self.weights * self.q * self.r**2))


def free_kernel(t: float, r) -> np.ndarray:
    """Heat kernel ``exp(-r^2 / 2t) / (2 pi t)^{3/2}`` of ``(1/2) Lap``."""
    r = np.asarray(r, dtype=float)
    return np.exp(-r * r / (2.0 * t)) / (2.0 * math.pi * t) ** 1.5


def radial_grid(b: float, R: float, dr: float) -> tuple[np.ndarray, np.ndarray]:
    """Nodes ``r = b sinh(xi / b)`` on a uniform ``xi`` grid and Simpson weights.

    Spacing is about ``dr`` inside the support, grows like ``dr r / b`` far
    out, and ``r = b`` is always a node. The interval count is even.
    """
    xi_b = b * math.asinh(1.0)
    m = max(2, math.ceil(xi_b / dr))
    h = xi_b / m
    n = math.ceil(b * math.asinh(R / b) / h)
    n += n % 2
    xi = h * np.arange(n + 1)
    r = b * np.sinh(xi / b)
    simpson = np.ones(n + 1)
    simpson[1:-1:2] = 4.0
    simpson[2:-1:2] = 2.0
    weights = simpson * h / 3.0 * np.cosh(xi / b)
    return r, weights


def _cell_averaged(p: Potential, r: np.ndarray) -> np.ndarray:
    edges = np.concatenate(([0.0], 0.5 * (r[1:] + r[:-1]), [r[-1]]))
    x, w = np.polynomial.legendre.leggauss(8)
    lo, hi = edges[:-1], edges[1:]
    pts = lo[:, None] + 0.5 * (hi - lo)[:, None] * (x + 1.0)
    return 0.5 * (p.evaluate(pts) @ w)


def _time_steps(t: float, dt: float, h0: float) -> np.ndarray:
    steps = []
    tau, h = 0.0, min(h0, dt)
    while t - tau > 1e-12 * t:
        step = min(h, t - tau)
        steps.append(step)
        tau += step
        h = min(h * GRADING, dt)
    return np.array(steps)


@njit(cache=True)
def _march(r, h_minus, h_plus, reaction, n_forced, steps, n_implicit):  # pragma: no cover - jitted
    n = r.size
    w = np.zeros(n)
    rhs = np.empty(n)
    cp = np.empty(n)
    piv = np.empty(n)
    lower = np.empty(n)
    upper = np.empty(n)
    for i in range(n):
        span = h_minus[i] + h_plus[i]
        lower[i] = 1.0 / (h_minus[i] * span)
        upper[i] = 1.0 / (h_plus[i] * span)
    forcing_old = np.zeros(n_forced)
    tau = 0.0
    last_dt = -1.0
    last_theta = -1.0
    for k in range(steps.size):
        dt = steps[k]
        theta = 1.0 if k < n_implicit else 0.5
        if dt != last_dt or theta != last_theta:
            # factor (I - theta dt L) once per distinct step
            a = theta * dt
            diag = 1.0 + a * (lower[0] + upper[0] - reaction[0])
            piv[0] = diag
            cp[0] = -a * upper[0] / diag
            for i in range(1, n):
                diag = 1.0 + a * (lower[i] + upper[i] - reaction[i])
                piv[i] = diag + a * lower[i] * cp[i - 1]
                cp[i] = -a * upper[i] / piv[i]
            last_dt = dt
            last_theta = theta
        ex = (1.0 - theta) * dt
        for i in range(n):
            val = w[i] * (1.0 - ex * (lower[i] + upper[i] - reaction[i]))
            if i > 0:
                val += ex * lower[i] * w[i - 1]
            if i < n - 1:
                val += ex * upper[i] * w[i + 1]
            rhs[i] = val
        tau += dt
        scale = math.sqrt(2.0 * tau)
        for i in range(n_forced):
            # exact time integral of r p0 over the step
            cur = math.erfc(r[i] / scale) / (2.0 * math.pi)
            rhs[i] += reaction[i] * (cur - forcing_old[i])
            forcing_old[i] = cur
        a = theta * dt
        rhs[0] = rhs[0] / piv[0]
        for i in range(1, n):
            rhs[i] = (rhs[i] + a * lower[i] * rhs[i - 1]) / piv[i]
        w[n - 1] = rhs[n - 1]
        for i in range(n - 2, -1, -1):
            w[i] = rhs[i] - cp[i] * w[i + 1]
    return w


def solve_forced_heat(p: Potential, beta: float, t: float, cfg: SolverConfig | None = None) -> RadialSolution:
    """Solve for ``u(t, r)`` on ``[0, R]`` with ``R = b + domain_factor sqrt(t)``."""
    cfg = cfg or SolverConfig()
    if not t > 0:
        raise ValueError(f"t must be positive, got {t}")
    if not beta >= 0:
        raise ValueError(f"beta must be nonnegative, got {beta}")
    r, weights = radial_grid(p.b, p.b + cfg.domain_factor * math.sqrt(t), cfg.dr)
    if beta == 0.0:
        return RadialSolution(r, np.zeros_like(r), weights, beta, t)
    reaction = beta * _cell_averaged(p, r)
    dt = min(cfg.dt, MAX_REACTION_STEP / reaction.max())
    steps = _time_steps(t, dt, cfg.dr**2)
    inner = r[1:-1]
    gaps = np.diff(r)
    n_forced = int(np.nonzero(reaction[1:-1] > 0)[0].max()) + 1
    w = _march(inner, gaps[:-1], gaps[1:], reaction[1:-1], n_forced, steps, RANNACHER_STEPS)
    u = np.empty_like(r)
    u[1:-1] = w / inner
    u[-1] = 0.0
    # u is even in r: extrapolate in r^2 to the origin
    r1, r2 = r[1] ** 2, r[2] ** 2
    u[0] = (r2 * u[1] - r1 * u[2]) / (r2 - r1)
    peak = np.abs(u).max()
    if abs(u[-2]) > BOUNDARY_TOL * peak:
        raise DomainError(
            f"|u| at the domain edge is {abs(u[-2]) / peak:.2e} of its peak; "
            "increase domain_factor"
        )
    return RadialSolution(r, u, weights, beta, t)


def _gamma(p: Potential, beta: float, crit: spectral.CriticalData) -> float:
    if beta <= 0:
        return math.nan
    try:
        return spectral.lambda0(p, beta, crit).k_root
    except (WindowError, BracketError):
        return math.nan


def moments(
    p: Potential,
    beta: float,
    t: float,
    cfg: SolverConfig | None = None,
    crit: spectral.CriticalData | None = None,
    *,
    gamma: float | None = None,
) -> MomentRecord:
    """Partition function, second moment and radius ``sqrt(m2 / m0)``.

    ``gamma`` is the signed root of ``1/beta = sigma0(k)``; it is NaN when
    ``beta`` lies outside the near-critical window.
    """
    cfg = cfg or SolverConfig()
    crit = crit or spectral.beta_critical(p)
    sol = solve_forced_heat(p, beta, t, cfg)
    m0 = 1.0 + sol.moment(0)
    m2 = 3.0 * t + sol.moment(2)
    radius = math.sqrt(m2 / m0)
    if cfg.check_convergence:
        coarse = solve_forced_heat(p, beta, t, cfg.coarsened())
        r_coarse = math.sqrt((3.0 * t + coarse.moment(2)) / (1.0 + coarse.moment(0)))
        if abs(r_coarse - radius) > cfg.convergence_tol * radius:
            raise ResolutionError(
                f"radius changes by {abs(r_coarse - radius) / radius:.2e} under grid coarsening "
                f"(beta={beta}, t={t}); refine dr/dt"
            )
    if gamma is None:
        gamma = _gamma(p, beta, crit)
    regime, chi = classify_regime(beta, t, crit.beta_cr)
    return MomentRecord(beta, t, m0, m0, m2, radius, gamma, chi, regime)


def endpoint_density(p: Potential, beta: float, t: float, cfg: SolverConfig | None = None) -> EndpointDensity:
    """Radial density ``q(r) = p_beta(t, 0, r) / Z`` of the endpoint."""
    sol = solve_forced_heat(p, beta, t, cfg)
    z = 1.0 + sol.moment(0)
    q = (free_kernel(t, sol.r) + sol.u) / z
    return EndpointDensity(sol.r, q, sol.weights)


_KIND_CODES = {"indicator": 0, "smooth_bump": 1, "tabulated": 2}


@njit(cache=True)
def _profile_sq(kind, b, amplitude, table_r, table_v, r2):  # pragma: no cover - jitted
    # v as a function of the squared radius; the common outside case exits first
    if r2 > b * b:
        return 0.0
    if kind == 0:
        return amplitude
    if kind == 1:
        x2 = r2 / (b * b)
        if x2 >= 1.0:
            return 0.0
        return amplitude * math.exp(1.0 - 1.0 / (1.0 - x2))
    return np.interp(math.sqrt(r2), table_r, table_v)


@njit(cache=True)
def _brownian_block(rng, size, n_steps, h, kind, b, amplitude, table_r, table_v):  # pragma: no cover - jitted
    occupation = np.empty(size)
    dist2 = np.empty(size)
    sqrt_h = math.sqrt(h)
    b2 = b * b
    v_start = _profile_sq(kind, b, amplitude, table_r, table_v, 0.0)
    for path in range(size):
        x = 0.0
        y = 0.0
        z = 0.0
        acc = 0.5 * v_start
        val = v_start
        for _ in range(n_steps):
            x += sqrt_h * rng.standard_normal()
            y += sqrt_h * rng.standard_normal()
            z += sqrt_h * rng.standard_normal()
            r2 = x * x + y * y + z * z
            # inline support test: keeps the hot loop free of a call per step
            val = _profile_sq(kind, b, amplitude, table_r, table_v, r2) if r2 <= b2 else 0.0
            acc += val
        occupation[path] = h * (acc - 0.5 * val)
        dist2[path] = x * x + y * y + z * z
    return occupation, dist2


@njit(cache=True)
def _resampled_replica(rng, size, n_steps, h, beta, kind, b, amplitude, table_r, table_v):  # pragma: no cover - jitted
    # Particles move together; weights are multiplied step by step and the
    # population is resampled (systematically) when its effective size drops
    # below half. Returns (log of the accumulated mean weights, mean W, mean W |x|^2).
    sqrt_h = math.sqrt(h)
    b2 = b * b
    half = 0.5 * beta * h
    x = np.zeros(size)
    y = np.zeros(size)
    z = np.zeros(size)
    vprev = np.full(size, _profile_sq(kind, b, amplitude, table_r, table_v, 0.0))
    w = np.ones(size)
    nx = np.empty(size)
    ny = np.empty(size)
    nz = np.empty(size)
    nv = np.empty(size)
    cdf = np.empty(size)
    log_scale = 0.0
    for step in range(n_steps):
        s1 = 0.0
        s2 = 0.0
        for i in range(size):
            x[i] += sqrt_h * rng.standard_normal()
            y[i] += sqrt_h * rng.standard_normal()
            z[i] += sqrt_h * rng.standard_normal()
            r2 = x[i] * x[i] + y[i] * y[i] + z[i] * z[i]
            val = _profile_sq(kind, b, amplitude, table_r, table_v, r2) if r2 <= b2 else 0.0
            if val != 0.0 or vprev[i] != 0.0:
                w[i] *= math.exp(half * (vprev[i] + val))
            vprev[i] = val
            s1 += w[i]
            s2 += w[i] * w[i]
        if step < n_steps - 1 and s1 * s1 < 0.5 * size * s2:
            log_scale += math.log(s1 / size)
            acc = 0.0
            for i in range(size):
                acc += w[i]
                cdf[i] = acc
            spacing = acc / size
            u = rng.random() * spacing
            j = 0
            for i in range(size):
                target = u + i * spacing
                while j < size - 1 and cdf[j] < target:
                    j += 1
                nx[i] = x[j]
                ny[i] = y[j]
                nz[i] = z[j]
                nv[i] = vprev[j]
            x[:] = nx
            y[:] = ny
            z[:] = nz
            vprev[:] = nv
            w[:] = 1.0
    sw = 0.0
    sm = 0.0
    for i in range(size):
        sw += w[i]
        sm += w[i] * (x[i] * x[i] + y[i] * y[i] + z[i] * z[i])
    return log_scale, sw / size, sm / size


def _substream(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(index,))))


def _plain_sums(p, beta, n_paths, n_steps, h, seed, args):
    totals = np.zeros(5)
    for block in range(math.ceil(n_paths / MC_BLOCK)):
        size = min(MC_BLOCK, n_paths - block * MC_BLOCK)
        occupation, dist2 = _brownian_block(_substream(seed, block), size, n_steps, h, *args)
        weight = np.exp(beta * occupation)
        m = dist2 * weight
        totals += np.array([weight.sum(), (weight * weight).sum(), m.sum(), (m * m).sum(), (weight * m).sum()])
    n = n_paths
    zbar, mbar = totals[0] / n, totals[2] / n
    var_z = (totals[1] / n - zbar**2) * n / (n - 1)
    var_m = (totals[3] / n - mbar**2) * n / (n - 1)
    cov = (totals[4] / n - zbar * mbar) * n / (n - 1)
    # variances of the means
    return zbar, mbar, var_z / n, var_m / n, cov / n


def _resampled_sums(p, beta, n_paths, n_steps, h, seed, args):
    base, extra = divmod(n_paths, MC_REPLICAS)
    zs = np.empty(MC_REPLICAS)
    ms = np.empty(MC_REPLICAS)
    for rep in range(MC_REPLICAS):
        size = base + (1 if rep < extra else 0)
        log_scale, wbar, mbar = _resampled_replica(_substream(seed, rep), size, n_steps, h, beta, *args)
        scale = math.exp(log_scale)
        zs[rep], ms[rep] = scale * wbar, scale * mbar
    k = MC_REPLICAS
    cov = np.cov(zs, ms, ddof=1)
    return zs.mean(), ms.mean(), cov[0, 0] / k, cov[1, 1] / k, cov[0, 1] / k


def feynman_kac_mc(p: Potential, beta: float, t: float, cfg: SolverConfig | None = None) -> McResult:
    """Brownian-path estimate of ``Z`` and the unnormalized second moment.

    Each path carries the weight ``exp(beta * trapezoid(v(omega)))``. With
    ``mc_method="plain"`` the paths are independent and the estimates are
    sample means. The default ``"resampled"`` method splits the paths into
    independent replicas whose populations are resampled by weight as they
    go, which keeps the rare long-dwelling paths that dominate ``Z`` at
    large ``beta t`` represented; errors come from the spread across
    replicas. Both estimators are unbiased for the same expectations and
    deterministic given the seed.
    """
    cfg = cfg or SolverConfig()
    if not t > 0:
        raise ValueError(f"t must be positive, got {t}")
    step = cfg.mc_step if cfg.mc_step is not None else min(0.01, t / 100.0)
    n_steps = max(1, math.ceil(t / step - 1e-9))
    h = t / n_steps
    if p.kind == "tabulated":
        table_r, table_v = p._table()
    else:
        table_r = table_v = np.zeros(1)
    args = (_KIND_CODES[p.kind], p.b, p.amplitude, table_r, table_v)
    sums = _plain_sums if cfg.mc_method == "plain" else _resampled_sums
    zbar, mbar, var_z, var_m, cov = sums(p, beta, cfg.mc_paths, n_steps, h, cfg.seed, args)
    n = cfg.mc_paths
    z_est = McEstimate(float(zbar), math.sqrt(max(var_z, 0.0)), n)
    m_est = McEstimate(float(mbar), math.sqrt(max(var_m, 0.0)), n)
    radius = math.sqrt(mbar / zbar)
    rel = var_m / mbar**2 + var_z / zbar**2 - 2.0 * cov / (mbar * zbar)
    r_err = 0.5 * radius * math.sqrt(max(rel, 0.0))
    if z_est.stderr > 0.05 * zbar or m_est.stderr > 0.05 * mbar:
        warnings.warn(
            f"under-resolved Monte-Carlo estimate at beta={beta}, t={t}; raise mc_paths",
            RuntimeWarning,
            stacklevel=2,
        )
    return McResult(z_est, m_est, float(radius), r_err)
