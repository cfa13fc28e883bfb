import math

import numpy as np
import pytest

import oracles as o
from polyscale import spectral
from polyscale.errors import BracketError, ConvergenceError, WindowError
from polyscale.potential import indicator, smooth_bump, tabulated

UNIT = indicator(1.0, 1.0)


@pytest.fixture(scope="module")
def crit():
    return spectral.critical_data(UNIT)


def test_kernel_at_zero_wavenumber():
    ker = spectral.assemble_kernel(UNIT, 0.0, 32, corrected=False)
    r, w = ker.nodes, ker.weights
    expected = 2.0 * np.sqrt(w)[:, None] * np.minimum.outer(r, r) * np.sqrt(w)[None, :]
    np.testing.assert_allclose(ker.matrix, expected, rtol=1e-14, atol=0)


def test_kernel_is_exactly_symmetric():
    for k in (-0.7, 0.0, 1.3):
        m = spectral.assemble_kernel(smooth_bump(), k, 64).matrix
        assert np.array_equal(m, m.T)


@pytest.mark.parametrize("r,s,k", [(0.5, 0.5, 1.0), (0.3, 0.8, 0.0), (0.5, 0.7, -0.5), (0.9, 0.2, 2.0)])
def test_reduced_kernel_matches_3d_resolvent(r, s, k):
    g = float(spectral.reduced_kernel(r, s, k))
    assert g == pytest.approx(o.reduced_kernel_mc(r, s, k), rel=2e-3)


def test_reduced_kernel_continuous_in_k():
    assert float(spectral.reduced_kernel(0.4, 0.6, 1e-9)) == pytest.approx(0.8, rel=1e-8)
    assert float(spectral.reduced_kernel(0.4, 0.6, -1e-9)) == pytest.approx(0.8, rel=1e-8)


@pytest.mark.parametrize("n", [8, 15])
def test_kernel_rejects_few_nodes(n):
    with pytest.raises(ValueError):
        spectral.assemble_kernel(UNIT, 0.0, n)
    with pytest.raises(ValueError):
        spectral.sigma0(UNIT, 0.0, n)


def test_kernel_rejects_nonfinite_k():
    with pytest.raises(ValueError):
        spectral.assemble_kernel(UNIT, math.nan)
    with pytest.raises(ValueError):
        spectral.sigma0(UNIT, math.inf)


def test_sigma0_at_threshold():
    s, phi = spectral.sigma0(UNIT, 0.0)
    assert s == pytest.approx(8.0 / math.pi**2, rel=1e-9)
    assert np.all(phi >= -1e-12)


def test_sigma0_on_square_well_branch():
    beta, k = o.square_well_beta(2.0)
    s, _ = spectral.sigma0(UNIT, k)
    assert s == pytest.approx(1.0 / beta, abs=1e-9)


def test_sigma0_against_brute_force():
    assert spectral.sigma0(UNIT, 1.0)[0] == pytest.approx(o.sigma0_indicator(1.0), rel=1e-6)


def test_sigma0_decays_at_large_k():
    s0 = spectral.sigma0(UNIT, 0.0)[0]
    assert spectral.sigma0(UNIT, 50.0)[0] < s0 / 100


def test_eigenfunction_normalised_and_ground_state_shape():
    s, phi = spectral.sigma0(UNIT, 0.0)
    r, w = spectral.gauss_nodes(1.0, spectral.DEFAULT_NODES)
    assert 4 * math.pi * np.sum(w * (r * phi) ** 2) == pytest.approx(1.0, rel=1e-12)
    # threshold state of the unit well: r phi ~ sin(pi r / 2)
    shape = np.sin(0.5 * math.pi * r) / r
    shape /= math.sqrt(4 * math.pi * np.sum(w * (r * shape) ** 2))
    np.testing.assert_allclose(phi, shape, atol=1e-6)


def test_symmetric_and_plain_forms_share_top_eigenvalue():
    for p in (UNIT, smooth_bump(), tabulated([(0, 1), (0.5, 0.5), (1.2, 0)])):
        for k in (-0.5, 0.0, 0.8):
            sym = spectral.assemble_kernel(p, k, 200).matrix
            plain = spectral.assemble_kernel(p, k, 200, symmetric=False).matrix
            top_sym = np.linalg.eigvalsh(sym)[-1]
            top_plain = np.max(np.linalg.eigvals(plain).real)
            assert top_sym == pytest.approx(top_plain, abs=1e-8)


@pytest.mark.parametrize("k", [-0.5, 0.0, 1.0, 3.0])
def test_self_convergence(k):
    a = spectral.sigma0(UNIT, k, 200)[0]
    b = spectral.sigma0(UNIT, k, 400)[0]
    assert abs(a - b) < 1e-8


def test_corrected_quadrature_beats_plain():
    exact = 8.0 / math.pi**2
    plain = np.linalg.eigvalsh(spectral.assemble_kernel(UNIT, 0.0, 100, corrected=False).matrix)[-1]
    corrected = np.linalg.eigvalsh(spectral.assemble_kernel(UNIT, 0.0, 100).matrix)[-1]
    assert abs(corrected - exact) < abs(plain - exact) / 100


def test_power_iteration_matches_dense_solver():
    rng = np.random.default_rng(3)
    a = rng.random((30, 30))
    a = a @ a.T
    lam, x, _ = spectral.power_iteration(a)
    assert lam == pytest.approx(np.linalg.eigvalsh(a)[-1], rel=1e-11)
    assert np.linalg.norm(x) == pytest.approx(1.0)


def test_power_iteration_budget():
    c, s = math.cos(0.3), math.sin(0.3)
    rot = np.array([[c, -s], [s, c]]) @ np.diag([1.0, 0.9])  # complex top pair: quotient keeps oscillating
    with pytest.raises(ConvergenceError):
        spectral.power_iteration(rot, max_iter=1000)
    a2 = np.diag([1.0, 0.9999])
    with pytest.raises(ConvergenceError):
        spectral.power_iteration(a2, max_iter=5)


def test_power_iteration_null_space():
    with pytest.raises(ConvergenceError):
        spectral.power_iteration(np.zeros((3, 3)))


def test_spectral_curve_invariants():
    ks = np.linspace(-1.0, 10.0, 23)
    curve = spectral.spectral_curve(UNIT, ks, 200)
    assert np.all(np.diff(curve.sigma0) < 0)
    assert np.all(curve.sigma0 > 0)
    assert np.all(curve.eigenfunctions >= -1e-12)
    assert curve.eigenfunctions.shape == (23, 200)


def test_beta_critical_values():
    assert spectral.beta_critical(UNIT).beta_cr == pytest.approx(math.pi**2 / 8, rel=1e-9)
    assert spectral.beta_critical(indicator(2.0)).beta_cr == pytest.approx(math.pi**2 / 32, rel=1e-9)


def test_beta_critical_smooth_bump_self_convergence():
    a = spectral.beta_critical(smooth_bump(), 200).beta_cr
    b = spectral.beta_critical(smooth_bump(), 400).beta_cr
    assert abs(a - b) < 1e-6


def test_critical_data_invariants(crit):
    assert crit.beta_cr * spectral.sigma0(UNIT, 0.0)[0] == pytest.approx(1.0, abs=1e-12)
    assert crit.kappa > 0 and crit.sigma0_prime0 < 0
    assert crit.kappa == pytest.approx((crit.beta_cr**2 * crit.sigma0_prime0) ** -2, rel=1e-12)
    assert crit.to_dict() == {
        "beta_cr": crit.beta_cr, "kappa": crit.kappa, "sigma0_prime0": crit.sigma0_prime0, "n_nodes": 400,
    }


def test_lambda0_at_threshold(crit):
    res = spectral.lambda0(UNIT, crit.beta_cr, crit)
    assert res.branch == "critical"
    assert res.lam == 0.0


def test_lambda0_eigenvalue_branch(crit):
    res = spectral.lambda0(UNIT, 2.41915, crit, window=1.0)
    assert res.branch == "eigenvalue"
    assert res.k_root == pytest.approx(o.FROZEN["square_well_k_2.41915"], abs=1e-8)
    assert res.lam == pytest.approx(o.FROZEN["square_well_lambda0_2.41915"], abs=1e-8)


def test_lambda0_resonance_branch(crit):
    beta = crit.beta_cr - 0.05
    res = spectral.lambda0(UNIT, beta, crit)
    assert res.branch == "resonance" and res.k_root < 0
    assert res.lam == pytest.approx(crit.kappa * 0.05**2, rel=0.05)


@pytest.mark.parametrize("offset", [-0.2, -0.1, -0.01, 0.01, 0.1, 0.2])
def test_root_consistency(crit, offset):
    beta = crit.beta_cr * (1 + offset)
    k = spectral.lambda0(UNIT, beta, crit).k_root
    assert beta * spectral.sigma0(UNIT, k)[0] == pytest.approx(1.0, abs=1e-8)


def test_lambda0_window(crit):
    with pytest.raises(WindowError):
        spectral.lambda0(UNIT, 2.41915, crit)
    with pytest.raises(ValueError):
        spectral.lambda0(UNIT, -1.0, crit, window=10.0)


def test_lambda0_bracket_failure(crit):
    with pytest.raises(BracketError):
        spectral.lambda0(UNIT, crit.beta_cr * 1.2, crit, k_max=0.01)
    with pytest.raises(BracketError):
        spectral.lambda0(UNIT, crit.beta_cr * 0.8, crit, k_min=-0.001)


def test_kappa_unit_well(crit):
    fd, _ = spectral.kappa_from_derivative(UNIT, crit)
    fit = spectral.kappa_from_fit(UNIT, crit)
    assert fd == pytest.approx(0.5, rel=1e-6)
    assert fit == pytest.approx(0.5, rel=1e-2)
    assert spectral.kappa(UNIT, crit) == fd


def test_kappa_invariant_under_rescaling():
    p = indicator(2.0)
    c = spectral.critical_data(p)
    assert c.kappa == pytest.approx(0.5 * 4, rel=1e-6)  # lambda0 ~ kappa delta^2 with delta ~ b^-2, lambda0 ~ b^-2
    # the dimensionless combination kappa * beta_cr^2 * b^2 is scale free
    assert c.kappa * c.beta_cr**2 * 4 == pytest.approx(0.5 * (math.pi**2 / 8) ** 2, rel=1e-6)


def test_quadratic_law_over_shrinking_offsets(crit):
    errs = []
    for off in (0.04, 0.02, 0.01, 0.005):
        d = off * crit.beta_cr
        lam = spectral.lambda0(UNIT, crit.beta_cr + d, crit).lam
        errs.append(abs(lam / d**2 - crit.kappa) / crit.kappa)
    assert errs[-1] < 0.02
    assert all(b < a for a, b in zip(errs, errs[1:]))


def test_varsigma_at_threshold(crit):
    val = spectral.varsigma(UNIT, 0.0, crit.beta_cr, crit)
    assert val == pytest.approx(-crit.sigma0_prime0, rel=1e-9)
    assert val == pytest.approx(1.0 / (crit.beta_cr**2 * math.sqrt(0.5)), rel=1e-6)
    assert val == pytest.approx(0.9292, abs=1e-4)


def test_varsigma_continuous_across_root(crit):
    beta = crit.beta_cr * 1.05
    root = spectral.lambda0(UNIT, beta, crit).k_root
    left = spectral.varsigma(UNIT, root - 1e-4, beta, crit)
    right = spectral.varsigma(UNIT, root + 1e-4, beta, crit)
    at = spectral.varsigma(UNIT, root, beta, crit)
    assert abs(left - right) < 1e-3 * abs(at)
    assert at == pytest.approx(0.5 * (left + right), rel=1e-4)
