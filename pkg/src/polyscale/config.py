"""Run configuration: a TOML file with ``potential``, ``spectral``, ``solver``,
``sweep`` and ``output`` tables. Unknown keys are rejected."""

from __future__ import annotations

import dataclasses
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import spectral
from .potential import Potential, from_mapping
from .propagator import SolverConfig

_POTENTIAL_KEYS = {"kind", "b", "amplitude", "samples"}
_SPECTRAL_KEYS = {"n_nodes", "k_min", "k_max", "k_count"}
_SOLVER_KEYS = {f.name for f in dataclasses.fields(SolverConfig)}
_SWEEP_KEYS = {"beta_offsets", "t_values", "chi_values", "chi_t_values", "window", "band_bound"}
_OUTPUT_KEYS = {"directory", "formats"}
_FORMATS = ("csv", "json")


class ConfigError(ValueError):
    """Malformed or out-of-range run configuration."""


@dataclass(frozen=True)
class SpectralSection:
    n_nodes: int = spectral.DEFAULT_NODES
    k_min: float = 0.0
    k_max: float = 5.0
    k_count: int = 51

    def __post_init__(self) -> None:
        if self.n_nodes < 16:
            raise ConfigError(f"spectral.n_nodes must be >= 16, got {self.n_nodes}")
        if not (0 <= self.k_min < self.k_max and math.isfinite(self.k_max)):
            raise ConfigError("spectral k grid needs 0 <= k_min < k_max")
        if self.k_count < 2:
            raise ConfigError("spectral.k_count must be >= 2")

    def grid(self) -> list[float]:
        step = (self.k_max - self.k_min) / (self.k_count - 1)
        return [self.k_min + i * step for i in range(self.k_count)]


@dataclass(frozen=True)
class SweepSection:
    beta_offsets: tuple[float, ...] = (-0.1, -0.05, -0.02, 0.0, 0.02, 0.05, 0.1)
    t_values: tuple[float, ...] = (10.0, 40.0, 160.0, 640.0, 2560.0)
    chi_values: tuple[float, ...] = ()
    chi_t_values: tuple[float, ...] = (100.0, 400.0, 1600.0)
    window: float = spectral.DEFAULT_WINDOW
    band_bound: float = 10.0


@dataclass(frozen=True)
class OutputSection:
    directory: str = "out"
    formats: tuple[str, ...] = _FORMATS

    def __post_init__(self) -> None:
        bad = set(self.formats) - set(_FORMATS)
        if bad or not self.formats:
            raise ConfigError(f"output.formats must be a non-empty subset of {_FORMATS}")


@dataclass(frozen=True)
class RunConfig:
    potential: Potential
    spectral: SpectralSection = field(default_factory=SpectralSection)
    solver: SolverConfig = field(default_factory=SolverConfig)
    sweep: SweepSection = field(default_factory=SweepSection)
    output: OutputSection = field(default_factory=OutputSection)

    def with_seed(self, seed: int) -> "RunConfig":
        try:
            return dataclasses.replace(self, solver=dataclasses.replace(self.solver, seed=seed))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc


def _section(doc: dict, name: str, allowed: set[str]) -> dict:
    sec = doc.get(name, {})
    if not isinstance(sec, dict):
        raise ConfigError(f"[{name}] must be a table")
    unknown = sorted(set(sec) - allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) in [{name}]: {', '.join(unknown)}")
    return sec


def _floats(sec: dict, name: str, key: str) -> dict:
    if key not in sec:
        return {}
    val = sec[key]
    if not isinstance(val, list) or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in val):
        raise ConfigError(f"{name}.{key} must be a list of numbers")
    return {key: tuple(float(x) for x in val)}


def from_dict(doc: dict) -> RunConfig:
    unknown = sorted(set(doc) - {"potential", "spectral", "solver", "sweep", "output"})
    if unknown:
        raise ConfigError(f"unknown section(s): {', '.join(unknown)}")
    if "potential" not in doc:
        raise ConfigError("missing [potential] section")
    try:
        pot = from_mapping(_section(doc, "potential", _POTENTIAL_KEYS))
        spec_sec = SpectralSection(**_section(doc, "spectral", _SPECTRAL_KEYS))
        solver = SolverConfig(**_section(doc, "solver", _SOLVER_KEYS))
        sw = dict(_section(doc, "sweep", _SWEEP_KEYS))
        for key in ("beta_offsets", "t_values", "chi_values", "chi_t_values"):
            sw.update(_floats(sw, "sweep", key))
        sweep = SweepSection(**sw)
        out = dict(_section(doc, "output", _OUTPUT_KEYS))
        if "formats" in out:
            out["formats"] = tuple(out["formats"])
        output = OutputSection(**out)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return RunConfig(pot, spec_sec, solver, sweep, output)


def load(path: str | Path) -> RunConfig:
    with open(path, "rb") as fh:
        try:
            doc = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    return from_dict(doc)
