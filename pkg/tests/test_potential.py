import math

import numpy as np
import pytest
from scipy import integrate

from polyscale.potential import (
    Potential,
    from_mapping,
    indicator,
    potential_norms,
    radial_quadrature,
    smooth_bump,
    tabulated,
)


def test_indicator_values():
    p = indicator(1.0, 1.0)
    assert p.evaluate(0.5) == 1.0
    assert p.evaluate(2.0) == 0.0
    assert p(1.0) == 1.0


def test_smooth_bump_boundary_and_centre():
    p = smooth_bump(1.0, 1.0)
    assert p.evaluate(1.0) == 0.0
    assert p.evaluate(0.0) == pytest.approx(1.0)
    assert p.evaluate(0.999) < 1e-200


def test_smooth_bump_is_flat_at_edge():
    p = smooth_bump(2.0, 3.0)
    r = np.linspace(1.9, 2.0, 2001)
    v = p.evaluate(r)
    dv = np.gradient(v, r)
    assert np.all(np.abs(dv[-50:]) < 1e-6)


def test_vectorised_evaluate():
    p = indicator(2.0, 0.5)
    v = p.evaluate(np.array([0.0, 1.0, 2.0, 2.5]))
    np.testing.assert_array_equal(v, [0.5, 0.5, 0.5, 0.0])


def test_negative_radius_rejected():
    with pytest.raises(ValueError):
        indicator().evaluate(-0.1)


def test_tabulated_interpolates_linearly():
    p = tabulated([(0.0, 2.0), (1.0, 1.0), (2.0, 0.0)], amplitude=0.5)
    assert p.b == 2.0
    assert p.evaluate(0.5) == pytest.approx(0.75)
    assert p.evaluate(1.5) == pytest.approx(0.25)
    assert p.evaluate(2.0) == 0.0
    assert p.evaluate(3.0) == 0.0


@pytest.mark.parametrize(
    "samples",
    [
        [(0.0, 1.0)],
        [(0.1, 1.0), (1.0, 0.0)],
        [(0.0, 1.0), (0.5, 1.0), (0.5, 0.0)],
        [(0.0, 1.0), (1.0, 0.5)],
        [(0.0, -1.0), (1.0, 0.0)],
        [(0.0, 0.0), (1.0, 0.0)],
    ],
)
def test_tabulated_validation(samples):
    with pytest.raises(ValueError):
        tabulated(samples)


@pytest.mark.parametrize(
    "kwargs",
    [dict(kind="square", b=1.0), dict(kind="indicator", b=0.0), dict(kind="indicator", b=1.0, amplitude=-1.0),
     dict(kind="indicator", b=1.0, amplitude=0.0), dict(kind="indicator", b=math.inf)],
)
def test_potential_validation(kwargs):
    with pytest.raises(ValueError):
        Potential(**kwargs)


def test_norms_indicator():
    assert potential_norms(indicator(1.0)) == pytest.approx((4 * math.pi / 3, 1.0), rel=1e-13)
    assert potential_norms(indicator(2.0)) == pytest.approx((32 * math.pi / 3, 1.0), rel=1e-13)


def test_norms_smooth_bump_against_dense_quadrature():
    p = smooth_bump(1.0, 1.0)
    ref, _ = integrate.quad(lambda r: 4 * math.pi * r * r * p.evaluate(r), 0, 1, epsabs=1e-14, limit=200)
    total, vmax = potential_norms(p)
    assert total == pytest.approx(ref, rel=1e-10)
    assert vmax == 1.0


def test_norms_refinement_invariant():
    p = smooth_bump(1.5, 2.0)
    a, _ = potential_norms(p, n=100)
    b, _ = potential_norms(p, n=400)
    assert a == pytest.approx(b, rel=1e-9)


def test_norms_tabulated_exact():
    # v = 1 - r on [0, 1]: 4 pi int (1 - r) r^2 = pi / 3
    p = tabulated([(0.0, 1.0), (1.0, 0.0)])
    assert potential_norms(p)[0] == pytest.approx(math.pi / 3, rel=1e-13)


def test_quadrature_splits_at_breakpoints():
    p = tabulated([(0.0, 1.0), (0.3, 0.2), (1.0, 0.0)])
    r, w = radial_quadrature(p, 16)
    assert w.sum() == pytest.approx(1.0)
    assert np.all((r > 0) & (r < 1))


def test_from_mapping():
    assert from_mapping({"kind": "smooth_bump", "b": 2.0, "amplitude": 0.5}) == smooth_bump(2.0, 0.5)
    p = from_mapping({"kind": "tabulated", "samples": [[0, 1], [2, 0]]})
    assert p.b == 2.0
    with pytest.raises(ValueError):
        from_mapping({"kind": "tabulated"})
    with pytest.raises(ValueError):
        from_mapping({"kind": "indicator", "samples": [[0, 1], [1, 0]]})
    with pytest.raises(ValueError):
        from_mapping({"kind": "tabulated", "b": 3.0, "samples": [[0, 1], [2, 0]]})
