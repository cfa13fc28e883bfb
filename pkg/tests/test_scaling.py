import math

import pytest

from polyscale import spectral
from polyscale.potential import indicator
from polyscale.propagator import MomentRecord, SolverConfig
from polyscale.regime import EXTENDED, GLOBULAR, classify_regime
from polyscale.scaling import (
    SweepError,
    SweepSpec,
    _band,
    band_ratio,
    fit_alpha_minus,
    fit_alpha_plus,
    run_sweep,
)

UNIT = indicator()


@pytest.fixture(scope="module")
def crit():
    return spectral.beta_critical(UNIT)


def _rec(beta, t, r, gamma, beta_cr=1.0):
    regime, chi = classify_regime(beta, t, beta_cr)
    return MomentRecord(beta, t, 1.0, 1.0, r * r, r, gamma, chi, regime)


def test_classify_regime():
    assert classify_regime(1.1, 100.0, 1.0) == (GLOBULAR, pytest.approx(1.0))
    assert classify_regime(1.0, 100.0, 1.0) == (EXTENDED, 0.0)
    assert classify_regime(0.9, 100.0, 1.0)[0] == EXTENDED
    # chi = 1 exactly belongs to the globular band
    assert classify_regime(1.5, 4.0, 1.0)[0] == GLOBULAR


def test_spec_validation(crit):
    with pytest.raises(ValueError):
        SweepSpec(UNIT, crit, beta_offsets=(0.3,))
    with pytest.raises(ValueError):
        SweepSpec(UNIT, crit, t_values=(10.0, 10.0))
    with pytest.raises(ValueError):
        SweepSpec(UNIT, crit, t_values=(-1.0, 10.0))
    with pytest.raises(ValueError):
        SweepSpec(UNIT, crit, chi_values=(-3.0,), chi_t_values=(1.0, 100.0))
    with pytest.raises(ValueError):
        SweepSpec(UNIT, crit, band_bound=1.0)


def test_spec_points(crit):
    spec = SweepSpec(UNIT, crit, beta_offsets=(0.0, 0.1), t_values=(10.0, 40.0), chi_values=(0.0,),
                     chi_t_values=(10.0, 100.0))
    pts = spec.points()
    assert pts == sorted(set(pts))
    assert len(pts) == 5  # (beta_cr, 10) appears in both the grid and the chi row
    assert (crit.beta_cr, 100.0) in pts


def test_band_ratio():
    g = _rec(1.5, 100.0, 2.0, 0.3)
    e = _rec(1.0, 100.0, 15.0, 0.0)
    assert band_ratio(g, 1.0) == pytest.approx(1.0)
    assert band_ratio(e, 1.0) == pytest.approx(1.5)


def test_band_summary():
    assert _band([], 10).verdict == "empty"
    ok = _band([1.0, 5.0, 9.9], 10)
    assert ok.verdict == "pass" and ok.spread == pytest.approx(9.9)
    assert _band([1.0, 10.5], 10).verdict == "fail"
    assert math.isnan(_band([], 10).spread)


def test_fit_alpha_plus_recovers_intercept():
    beta, gamma = 1.2, 0.3
    recs = [_rec(beta, t, (2.4 + 1.5 / (gamma**2 * t)) / 0.2, gamma) for t in (50.0, 100.0, 200.0, 400.0)]
    (fit,) = fit_alpha_plus(recs, 1.0)
    assert fit.ok and fit.n_points == 4
    assert fit.value == pytest.approx(2.4, rel=1e-12)
    assert fit.residual < 1e-12


def test_fit_alpha_plus_needs_three_points():
    recs = [_rec(1.2, t, 10.0, 0.3) for t in (50.0, 100.0)]
    (fit,) = fit_alpha_plus(recs, 1.0)
    assert not fit.ok and math.isnan(fit.value)


def test_fit_alpha_plus_skips_subcritical():
    recs = [_rec(0.8, t, 10.0, -0.3) for t in (50.0, 100.0, 200.0)]
    assert fit_alpha_plus(recs, 1.0) == []


def test_fit_alpha_minus_recovers_intercept():
    chi = -2.0
    recs = []
    for t in (100.0, 400.0, 1600.0):
        beta = 1.0 + chi / math.sqrt(t)
        recs.append(_rec(beta, t, math.sqrt(t) * (1.6 + 0.8 / math.sqrt(t)), -0.1))
    (fit,) = fit_alpha_minus(recs)
    assert fit.ok and fit.key == pytest.approx(chi)
    assert fit.value == pytest.approx(1.6, rel=1e-10)


def test_fit_alpha_minus_reports_unmatched_groups():
    recs = [_rec(1.0 - 0.1 * i, 100.0, 12.0, -0.1) for i in range(3)]
    fits = fit_alpha_minus(recs)
    assert len(fits) == 3 and not any(f.ok for f in fits)


def test_critical_rows_only_sweep(crit):
    spec = SweepSpec(UNIT, crit, beta_offsets=(0.0,), t_values=(100.0, 400.0, 1600.0), chi_values=(0.0,),
                     chi_t_values=(100.0, 400.0, 1600.0))
    report = run_sweep(spec)
    assert report.band1.verdict == "empty"
    assert report.band2.verdict == "pass" and report.band2.n_points == 3
    assert report.passed
    (fit,) = report.alpha_minus
    assert fit.value == pytest.approx(math.sqrt(2.0), rel=0.01)


def test_parallel_sweep_matches_serial(crit):
    spec = SweepSpec(UNIT, crit, beta_offsets=(-0.05, 0.05), t_values=(10.0, 40.0))
    serial = run_sweep(spec, jobs=1)
    parallel = run_sweep(spec, jobs=2)
    assert serial.records == parallel.records


def test_band_failure_detected(crit):
    spec = SweepSpec(UNIT, crit, beta_offsets=(-0.1, 0.0), t_values=(10.0, 2560.0), band_bound=1.05)
    report = run_sweep(spec)
    assert report.band2.verdict == "fail"
    assert not report.passed


def test_excessive_failures_raise(crit):
    coarse = SolverConfig(dr=0.1, check_convergence=True)
    spec = SweepSpec(UNIT, crit, beta_offsets=(0.05,), t_values=(40.0, 160.0), solver=coarse)
    with pytest.raises(SweepError) as info:
        run_sweep(spec)
    assert len(info.value.report.failures) == 2
    assert "ResolutionError" in info.value.report.failures[0][2]
