"""Sweeps over ``(beta, t)`` and the two-band scaling law of the radius.

In the globular band ``chi = (beta - beta_cr) sqrt(t) >= 1`` the radius
scales like ``1 / (beta - beta_cr)``; in the extended band ``chi <= 1`` it
scales like ``sqrt(t)``. A sweep records one :class:`MomentRecord` per point,
checks that each normalized ratio stays within a bounded band, and
extrapolates the limiting coefficients.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import spectral
from .errors import PolyscaleError
from .potential import Potential
from .propagator import MomentRecord, SolverConfig, moments
from .regime import GLOBULAR, classify_regime

__all__ = [
    "AlphaFit",
    "BandSummary",
    "RegimeReport",
    "SweepError",
    "SweepSpec",
    "band_ratio",
    "classify_regime",
    "fit_alpha_minus",
    "fit_alpha_plus",
    "run_sweep",
]

log = logging.getLogger(__name__)

MAX_FAILED_FRACTION = 0.10
CHI_MATCH_TOL = 1e-9


class SweepError(PolyscaleError):
    """Too many sweep points failed; the partial report is attached."""

    def __init__(self, message: str, report: "RegimeReport"):
        super().__init__(message)
        self.report = report


@dataclass(frozen=True)
class SweepSpec:
    """Grid of couplings and lengths.

    ``beta_offsets`` are relative, ``(beta - beta_cr) / beta_cr``. Each entry
    of ``chi_values`` adds a row at fixed ``chi`` with
    ``beta = beta_cr + chi / sqrt(t)`` for ``t`` in ``chi_t_values``.
    """

    potential: Potential
    crit: spectral.CriticalData
    beta_offsets: tuple[float, ...] = (-0.1, -0.05, -0.02, 0.0, 0.02, 0.05, 0.1)
    t_values: tuple[float, ...] = tuple(10.0 * 4**j for j in range(5))
    chi_values: tuple[float, ...] = ()
    chi_t_values: tuple[float, ...] = (100.0, 400.0, 1600.0)
    solver: SolverConfig = field(default_factory=SolverConfig)
    window: float = spectral.DEFAULT_WINDOW
    band_bound: float = 10.0

    def __post_init__(self) -> None:
        for o in self.beta_offsets:
            if abs(o) > self.window:
                raise ValueError(f"offset {o} lies outside the validity window {self.window}")
        for name in ("t_values", "chi_t_values"):
            ts = getattr(self, name)
            if any(t <= 0 for t in ts) or any(b <= a for a, b in zip(ts, ts[1:])):
                raise ValueError(f"{name} must be positive and strictly increasing")
        for chi in self.chi_values:
            for t in self.chi_t_values:
                if abs(chi / math.sqrt(t)) > self.window * self.crit.beta_cr:
                    raise ValueError(
                        f"fixed-chi row chi={chi} leaves the validity window at t={t}"
                    )
        if not self.band_bound > 1:
            raise ValueError("band_bound must exceed 1")

    def points(self) -> list[tuple[float, float]]:
        bc = self.crit.beta_cr
        pts = [(bc * (1.0 + o), float(t)) for o in self.beta_offsets for t in self.t_values]
        pts += [(bc + chi / math.sqrt(t), float(t)) for chi in self.chi_values for t in self.chi_t_values]
        return sorted(set(pts))


@dataclass(frozen=True)
class BandSummary:
    n_points: int
    ratio_min: float
    ratio_max: float
    verdict: str  # "pass", "fail" or "empty"

    @property
    def spread(self) -> float:
        return self.ratio_max / self.ratio_min if self.n_points else math.nan


@dataclass(frozen=True)
class AlphaFit:
    key: float
    value: float
    residual: float
    n_points: int
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass
class RegimeReport:
    records: list[MomentRecord]
    beta_cr: float
    band1: BandSummary
    band2: BandSummary
    alpha_plus: list[AlphaFit]
    alpha_minus: list[AlphaFit]
    failures: list[tuple[float, float, str]] = field(default_factory=list)
    findings: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.band1.verdict != "fail" and self.band2.verdict != "fail"


def band_ratio(rec: MomentRecord, beta_cr: float) -> float:
    """``r (beta - beta_cr)`` for globular records, ``r / sqrt(t)`` otherwise."""
    if rec.regime == GLOBULAR:
        return rec.r * (rec.beta - beta_cr)
    return rec.r / math.sqrt(rec.t)


def _band(values: list[float], bound: float) -> BandSummary:
    if not values:
        return BandSummary(0, math.nan, math.nan, "empty")
    lo, hi = min(values), max(values)
    ok = lo > 0 and hi / lo <= bound
    return BandSummary(len(values), lo, hi, "pass" if ok else "fail")


def fit_alpha_plus(records: list[MomentRecord], beta_cr: float, *, min_growth: float = 4.0) -> list[AlphaFit]:
    """Extrapolate ``r (beta - beta_cr)`` to ``1 / (gamma^2 t) -> 0`` per coupling.

    Uses globular records with ``gamma^2 t >= min_growth``; needs three per
    coupling. The line goes through the two longest chains and the residual
    is the largest miss on the others.
    """
    fits = []
    for beta in sorted({rec.beta for rec in records if rec.beta > beta_cr}):
        rows = [
            rec for rec in records
            if rec.beta == beta and rec.chi >= 1.0 and rec.gamma > 0
            and rec.gamma**2 * rec.t >= min_growth
        ]
        if len(rows) < 3:
            fits.append(AlphaFit(beta, math.nan, math.nan, len(rows), "fewer than 3 globular points with gamma^2 t >= 4"))
            continue
        rows.sort(key=lambda rec: rec.t)
        x = np.array([1.0 / (rec.gamma**2 * rec.t) for rec in rows])
        y = np.array([rec.r * (beta - beta_cr) for rec in rows])
        slope = (y[-1] - y[-2]) / (x[-1] - x[-2])
        intercept = y[-1] - slope * x[-1]
        residual = float(np.max(np.abs(y[:-2] - (intercept + slope * x[:-2]))))
        fits.append(AlphaFit(beta, float(intercept), residual, len(rows)))
    return fits


def _group_by_chi(records: list[MomentRecord]) -> list[list[MomentRecord]]:
    groups: list[list[MomentRecord]] = []
    for rec in sorted(records, key=lambda rec: rec.chi):
        if groups and abs(rec.chi - groups[-1][0].chi) <= CHI_MATCH_TOL * max(1.0, abs(rec.chi)):
            groups[-1].append(rec)
        else:
            groups.append([rec])
    return groups


def fit_alpha_minus(records: list[MomentRecord]) -> list[AlphaFit]:
    """Extrapolate ``r / sqrt(t)`` linearly in ``1 / sqrt(t)`` at matched ``chi``.

    Only records with ``chi <= 1`` take part. Groups spanning fewer than three
    lengths are returned as failed fits.
    """
    fits = []
    for group in _group_by_chi([rec for rec in records if rec.chi <= 1.0]):
        chi = group[0].chi
        ts = sorted({rec.t for rec in group})
        if len(ts) < 3:
            fits.append(AlphaFit(chi, math.nan, math.nan, len(ts), "chi not matched across 3 lengths"))
            continue
        x = np.array([1.0 / math.sqrt(rec.t) for rec in group])
        y = np.array([rec.r / math.sqrt(rec.t) for rec in group])
        slope, intercept = np.polyfit(x, y, 1)
        residual = float(np.max(np.abs(y - (intercept + slope * x))))
        fits.append(AlphaFit(chi, float(intercept), residual, len(ts)))
    return fits


def _solve_point(args):
    p, beta, t, cfg, crit, gamma = args
    try:
        return moments(p, beta, t, cfg, crit, gamma=gamma), None
    except (PolyscaleError, ValueError) as exc:
        return None, f"{type(exc).__name__}: {exc}"


def _gamma_for(p: Potential, beta: float, crit: spectral.CriticalData, window: float) -> float:
    try:
        return spectral.lambda0(p, beta, crit, window=window).k_root
    except (PolyscaleError, ValueError) as exc:
        log.warning("no near-critical root at beta=%r: %s", beta, exc)
        return math.nan


def run_sweep(spec: SweepSpec, jobs: int = 1) -> RegimeReport:
    """Solve every sweep point and summarize both scaling bands.

    Point failures are logged and excluded; more than 10% failed points
    raise :class:`SweepError`.
    """
    pts = spec.points()
    gammas = {beta: _gamma_for(spec.potential, beta, spec.crit, spec.window) for beta, _ in pts}
    tasks = [(spec.potential, beta, t, spec.solver, spec.crit, gammas[beta]) for beta, t in pts]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_solve_point, tasks))
    else:
        outcomes = [_solve_point(task) for task in tasks]

    records, failures = [], []
    for (beta, t), (rec, err) in zip(pts, outcomes):
        if err is None:
            records.append(rec)
        else:
            log.warning("sweep point beta=%r t=%r failed: %s", beta, t, err)
            failures.append((beta, t, err))
    records.sort(key=lambda rec: (rec.beta, rec.t))

    bc = spec.crit.beta_cr
    band1 = _band([rec.r * (rec.beta - bc) for rec in records if rec.chi >= 1.0], spec.band_bound)
    band2 = _band([rec.r / math.sqrt(rec.t) for rec in records if rec.chi <= 1.0], spec.band_bound)
    fixed = [
        rec for rec in records
        if any(abs(rec.chi - chi) <= CHI_MATCH_TOL * max(1.0, abs(chi)) for chi in spec.chi_values)
    ]
    report = RegimeReport(
        records=records,
        beta_cr=bc,
        band1=band1,
        band2=band2,
        alpha_plus=fit_alpha_plus(records, bc),
        alpha_minus=fit_alpha_minus(fixed),
        failures=failures,
    )
    profile = [fit.value for fit in report.alpha_minus if fit.ok]
    if len(profile) > 1 and any(b >= a for a, b in zip(profile, profile[1:])):
        report.findings.append("alpha_minus profile is not monotone decreasing in chi")
    if len(failures) > MAX_FAILED_FRACTION * len(pts):
        raise SweepError(f"{len(failures)} of {len(pts)} sweep points failed", report)
    return report
