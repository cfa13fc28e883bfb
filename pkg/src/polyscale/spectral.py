"""Principal eigenvalue of the Birman-Schwinger operator and the critical coupling.

The operator ``-v R_{k^2,0}`` acts on functions supported in the ball of
radius ``b``. Its Perron eigenfunction is radial, so only the ``l = 0``
sector is discretized: with ``psi(r) = r phi(r)`` the operator becomes

    (K psi)(r) = v(r) * integral_0^b g(r, s) psi(s) ds,
    g(r, s) = 2 sinh(mu r_<) exp(-mu r_>) / mu,   mu = sqrt(2) k,

and ``g(r, s) = 2 min(r, s)`` at ``k = 0``. The Nystrom matrix is built on
Gauss-Legendre nodes in the symmetric form ``sqrt(v) G sqrt(v)``. Because
``g`` has a slope discontinuity on the diagonal, plain Gauss-Legendre only
converges like ``n^-2``; a singularity-subtraction term on the diagonal
(exact row integral minus its quadrature) restores ``n^-4`` convergence
without breaking symmetry.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple, Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import BracketError, ConvergenceError, ResolutionError, WindowError
from .potential import Potential

SQRT2 = math.sqrt(2.0)
DEFAULT_NODES = 400
DEFAULT_WINDOW = 0.25
POWER_TOL = 1e-12
POWER_MAX_ITER = 100_000
ROOT_TOL = 1e-10
_SUBTRACTION_ORDER = 64


@dataclass(frozen=True)
class Kernel:
    matrix: np.ndarray
    nodes: np.ndarray
    weights: np.ndarray
    k: float
    symmetric: bool


@dataclass(frozen=True)
class CriticalData:
    beta_cr: float
    n_nodes: int
    kappa: float | None = None
    sigma0_prime0: float | None = None

    def to_dict(self) -> dict:
        return {
            "beta_cr": self.beta_cr,
            "kappa": self.kappa,
            "sigma0_prime0": self.sigma0_prime0,
            "n_nodes": self.n_nodes,
        }


@dataclass(frozen=True)
class SpectralCurve:
    k: np.ndarray
    sigma0: np.ndarray
    nodes: np.ndarray
    eigenfunctions: np.ndarray = field(repr=False)
    n_nodes: int = DEFAULT_NODES


class Lambda0(NamedTuple):
    k_root: float
    lam: float
    branch: str


def reduced_kernel(r, s, k: float) -> np.ndarray:
    """Radial kernel ``g(r, s)`` of ``-R_{k^2,0}`` in the ``psi = r phi`` variable."""
    r = np.asarray(r, dtype=float)
    s = np.asarray(s, dtype=float)
    lo = np.minimum(r, s)
    hi = np.maximum(r, s)
    mu = SQRT2 * k
    if mu == 0.0:
        return 2.0 * lo
    # 2 sinh(mu lo) e^{-mu hi} / mu, written without overflow or cancellation
    return np.exp(-mu * (hi - lo)) * -np.expm1(-2.0 * mu * lo) / mu


def gauss_nodes(b: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * b * (x + 1.0), 0.5 * b * w


def _row_integrals(nodes: np.ndarray, b: float, k: float) -> np.ndarray:
    # integral_0^b g(r_i, s) ds, split at s = r_i where g is smooth on each side
    x, w = np.polynomial.legendre.leggauss(_SUBTRACTION_ORDER)
    left = 0.5 * nodes[:, None] * (x + 1.0)
    right = nodes[:, None] + 0.5 * (b - nodes[:, None]) * (x + 1.0)
    gl = reduced_kernel(nodes[:, None], left, k)
    gr = reduced_kernel(nodes[:, None], right, k)
    return 0.5 * nodes * (gl @ w) + 0.5 * (b - nodes) * (gr @ w)


def assemble_kernel(
    p: Potential,
    k: float,
    n: int = DEFAULT_NODES,
    *,
    symmetric: bool = True,
    corrected: bool = True,
) -> Kernel:
    """Nystrom discretization of ``-v R_{k^2,0}`` in the radial sector.

    ``symmetric=True`` returns ``sqrt(w v) g sqrt(w v)``; otherwise the
    matrix acting on nodal values of ``psi = r phi``. ``corrected=False``
    drops the diagonal singularity subtraction (plain Nystrom).
    """
    if n < 16:
        raise ValueError(f"need at least 16 quadrature nodes, got {n}")
    if not math.isfinite(k):
        raise ValueError(f"wavenumber must be finite, got {k}")
    r, w = gauss_nodes(p.b, n)
    v = p.evaluate(r)
    g = reduced_kernel(r[:, None], r[None, :], k)
    diag = _row_integrals(r, p.b, k) - g @ w if corrected else np.zeros(n)
    if symmetric:
        sw = np.sqrt(w * v)
        mat = sw[:, None] * g * sw[None, :]
        mat[np.diag_indices(n)] += v * diag
        mat = 0.5 * (mat + mat.T)
    else:
        mat = v[:, None] * g * w[None, :]
        mat[np.diag_indices(n)] += v * diag
    return Kernel(mat, r, w, float(k), symmetric)


def power_iteration(
    a: np.ndarray,
    tol: float = POWER_TOL,
    max_iter: int = POWER_MAX_ITER,
    x0: np.ndarray | None = None,
) -> tuple[float, np.ndarray, int]:
    """Dominant eigenpair of a matrix with a simple, positive top eigenvalue.

    Stops when the Rayleigh quotient changes by less than ``tol`` relative.
    Returns ``(eigenvalue, unit eigenvector, iterations)``.
    """
    x = np.ones(a.shape[0]) if x0 is None else np.asarray(x0, dtype=float).copy()
    x /= np.linalg.norm(x)
    prev = None
    for it in range(1, max_iter + 1):
        y = a @ x
        lam = float(x @ y)
        norm = np.linalg.norm(y)
        if norm == 0.0:
            raise ConvergenceError("power iteration hit the null space")
        x = y / norm
        if prev is not None and abs(lam - prev) <= tol * abs(lam):
            return lam, x, it
        prev = lam
    raise ConvergenceError(
        f"power iteration did not converge in {max_iter} iterations "
        "(near-degenerate top of spectrum?)"
    )


@lru_cache(maxsize=8192)
def _principal(p: Potential, k: float, n: int, tol: float, max_iter: int):
    ker = assemble_kernel(p, k, n)
    sigma, x, _ = power_iteration(ker.matrix, tol, max_iter)
    if x.sum() < 0:
        x = -x
    # x = sqrt(w) chi with psi = sqrt(v) chi
    psi = np.sqrt(p.evaluate(ker.nodes)) * x / np.sqrt(ker.weights)
    psi /= math.sqrt(4.0 * math.pi * float(np.sum(ker.weights * psi * psi)))
    phi = psi / ker.nodes
    phi.setflags(write=False)
    return sigma, phi


def sigma0(
    p: Potential,
    k: float,
    n: int = DEFAULT_NODES,
    *,
    tol: float = POWER_TOL,
    max_iter: int = POWER_MAX_ITER,
) -> tuple[float, np.ndarray]:
    """Principal eigenvalue and radial eigenfunction of ``-v R_{k^2,0}``.

    The eigenfunction ``phi`` is sampled at the Gauss-Legendre nodes of
    :func:`gauss_nodes`, has unit ``L2(R^3)`` quadrature norm and is
    nonnegative.
    """
    if n < 16:
        raise ValueError(f"need at least 16 quadrature nodes, got {n}")
    if not math.isfinite(k):
        raise ValueError(f"wavenumber must be finite, got {k}")
    sigma, phi = _principal(p, float(k), int(n), float(tol), int(max_iter))
    return sigma, phi.copy()


def spectral_curve(p: Potential, ks: Sequence[float], n: int = DEFAULT_NODES) -> SpectralCurve:
    ks = np.asarray(sorted(float(k) for k in ks))
    values, funcs = [], []
    for k in ks:
        s, phi = sigma0(p, k, n)
        values.append(s)
        funcs.append(phi)
    nodes, _ = gauss_nodes(p.b, n)
    return SpectralCurve(ks, np.array(values), nodes, np.array(funcs), n)


def beta_critical(p: Potential, n: int = DEFAULT_NODES) -> CriticalData:
    """Critical coupling ``1 / sigma0(0)``."""
    s0, _ = sigma0(p, 0.0, n)
    return CriticalData(beta_cr=1.0 / s0, n_nodes=n)


def sigma0_derivative(p: Potential, k: float, n: int = DEFAULT_NODES, h: float | None = None) -> float:
    """Central difference of ``sigma0`` at ``k`` with one Richardson level."""
    h = 1e-3 / p.b if h is None else h

    def central(step):
        return (sigma0(p, k + step, n)[0] - sigma0(p, k - step, n)[0]) / (2.0 * step)

    return (4.0 * central(0.5 * h) - central(h)) / 3.0


def _check_window(beta: float, crit: CriticalData, window: float) -> None:
    if not beta > 0:
        raise ValueError(f"coupling must be positive, got {beta}")
    if abs(beta - crit.beta_cr) > window * crit.beta_cr:
        raise WindowError(
            f"beta={beta} is outside the validity window "
            f"|beta - beta_cr| <= {window} * beta_cr (beta_cr={crit.beta_cr})"
        )


def lambda0(
    p: Potential,
    beta: float,
    crit: CriticalData,
    *,
    window: float = DEFAULT_WINDOW,
    k_max: float | None = None,
    k_min: float | None = None,
    tol: float = ROOT_TOL,
) -> Lambda0:
    """Solve ``1/beta = sigma0(k)`` for the real root ``k`` and return ``k^2``.

    Positive roots are eigenvalues of ``H_beta``, negative roots are
    resonances, and ``k = 0`` is the critical point.
    """
    _check_window(beta, crit, window)
    n = crit.n_nodes
    k_max = 10.0 / p.b if k_max is None else k_max
    k_min = -2.0 / p.b if k_min is None else k_min
    target = 1.0 / beta

    def f(k):
        return sigma0(p, k, n)[0] - target

    f0 = f(0.0)
    if abs(f0) <= 4.0 * np.finfo(float).eps * target:
        return Lambda0(0.0, 0.0, "critical")
    if f0 > 0:
        lo, hi = 0.0, k_max
        if f(hi) > 0:
            raise BracketError(f"no root of 1/beta = sigma0(k) in [0, {k_max}] for beta={beta}")
    else:
        lo, hi = k_min, 0.0
        if f(lo) < 0:
            raise BracketError(f"no root of 1/beta = sigma0(k) in [{k_min}, 0] for beta={beta}")
    k = brentq(f, lo, hi, xtol=tol, rtol=4 * np.finfo(float).eps, maxiter=200)
    if k > tol:
        branch = "eigenvalue"
    elif k < -tol:
        branch = "resonance"
    else:
        branch = "critical"
    return Lambda0(float(k), float(k * k), branch)


def kappa_from_derivative(p: Potential, crit: CriticalData) -> tuple[float, float]:
    """``(kappa, sigma0'(0))`` from implicit differentiation of ``1/beta = sigma0(k)``."""
    d = sigma0_derivative(p, 0.0, crit.n_nodes)
    return 1.0 / (crit.beta_cr**2 * d) ** 2, d


def kappa_from_fit(
    p: Potential,
    crit: CriticalData,
    offsets: Sequence[float] = (-0.02, -0.01, 0.01, 0.02),
) -> float:
    """Intercept of ``lambda0 / (beta - beta_cr)^2`` fitted linearly in the offset."""
    deltas = np.array([o * crit.beta_cr for o in offsets])
    ratios = np.array(
        [lambda0(p, crit.beta_cr + d, crit).lam / (d * d) for d in deltas]
    )
    slope, intercept = np.polyfit(deltas, ratios, 1)
    return float(intercept)


def kappa(p: Potential, crit: CriticalData, *, max_disagreement: float = 0.05) -> float:
    """Curvature ``kappa`` in ``lambda0 ~ kappa (beta - beta_cr)^2``.

    Raises :class:`ResolutionError` if the derivative and fit routes differ
    by more than ``max_disagreement`` relative.
    """
    kap, _ = kappa_from_derivative(p, crit)
    fit = kappa_from_fit(p, crit)
    if abs(fit - kap) > max_disagreement * kap:
        raise ResolutionError(
            f"kappa estimates disagree: derivative {kap:.6g} vs fit {fit:.6g}"
        )
    return kap


def critical_data(p: Potential, n: int = DEFAULT_NODES) -> CriticalData:
    """``beta_cr``, ``kappa`` and ``sigma0'(0)`` in one record."""
    crit = beta_critical(p, n)
    kap = kappa(p, crit)
    _, d = kappa_from_derivative(p, crit)
    return CriticalData(crit.beta_cr, n, kap, d)


def varsigma(
    p: Potential,
    k: float,
    beta: float,
    crit: CriticalData,
    *,
    window: float = DEFAULT_WINDOW,
) -> float:
    """``(1/beta - sigma0(k)) / (k - k_root(beta))``, continued across the zero."""
    root = lambda0(p, beta, crit, window=window).k_root
    gap = k - root
    if abs(gap) < 1e-6:
        return -sigma0_derivative(p, k, crit.n_nodes)
    return (1.0 / beta - sigma0(p, k, crit.n_nodes)[0]) / gap
