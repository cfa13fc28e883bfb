"""Critical coupling, near-critical eigenvalue and polymer radius scaling
for radial attractive potentials in three dimensions."""

from .errors import (
    BracketError,
    ConvergenceError,
    DomainError,
    PolyscaleError,
    ResolutionError,
    WindowError,
)
from .potential import Potential, indicator, potential_norms, smooth_bump, tabulated
from .propagator import (
    MomentRecord,
    SolverConfig,
    endpoint_density,
    feynman_kac_mc,
    moments,
    solve_forced_heat,
)
from .regime import EXTENDED, GLOBULAR, classify_regime
from .scaling import RegimeReport, SweepSpec, run_sweep
from .spectral import (
    CriticalData,
    beta_critical,
    critical_data,
    kappa,
    lambda0,
    sigma0,
    varsigma,
)

__version__ = "0.1.0"

__all__ = [
    "BracketError",
    "ConvergenceError",
    "CriticalData",
    "DomainError",
    "EXTENDED",
    "GLOBULAR",
    "MomentRecord",
    "PolyscaleError",
    "Potential",
    "RegimeReport",
    "ResolutionError",
    "SolverConfig",
    "SweepSpec",
    "WindowError",
    "beta_critical",
    "classify_regime",
    "critical_data",
    "endpoint_density",
    "feynman_kac_mc",
    "indicator",
    "kappa",
    "lambda0",
    "moments",
    "potential_norms",
    "run_sweep",
    "sigma0",
    "smooth_bump",
    "solve_forced_heat",
    "tabulated",
    "varsigma",
]
