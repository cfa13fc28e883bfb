"""Radial, nonnegative, compactly supported potentials."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

KINDS = ("indicator", "smooth_bump", "tabulated")


@dataclass(frozen=True)
class Potential:
    """Radial profile ``v(r) >= 0`` vanishing for ``r > b``.

    Use the :func:`indicator`, :func:`smooth_bump` and :func:`tabulated`
    constructors rather than building instances by hand.
    """

    kind: str
    b: float
    amplitude: float = 1.0
    samples: tuple[tuple[float, float], ...] = field(default=())

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown potential kind {self.kind!r}; expected one of {KINDS}")
        if not (math.isfinite(self.b) and self.b > 0):
            raise ValueError(f"support radius must be positive, got {self.b}")
        if not (math.isfinite(self.amplitude) and self.amplitude >= 0):
            raise ValueError(f"amplitude must be >= 0, got {self.amplitude}")
        if self.kind == "tabulated":
            _check_samples(self.samples, self.b)
        elif self.samples:
            raise ValueError("samples are only accepted for kind='tabulated'")
        if self.peak() <= 0:
            raise ValueError("potential is identically zero")

    def __call__(self, r):
        return self.evaluate(r)

    def evaluate(self, r):
        """Return ``v(r)``; exactly zero for ``r > b``. Accepts scalars or arrays."""
        arr = np.asarray(r, dtype=float)
        if np.any(arr < 0):
            raise ValueError("radius must be nonnegative")
        if self.kind == "indicator":
            out = np.where(arr <= self.b, self.amplitude, 0.0)
        elif self.kind == "smooth_bump":
            x = arr / self.b
            inside = x < 1.0
            xs = np.where(inside, x, 0.0)
            out = np.where(inside, self.amplitude * np.exp(1.0 - 1.0 / (1.0 - xs * xs)), 0.0)
        else:
            rs, vs = self._table()
            out = np.interp(arr, rs, vs, right=0.0)
            out = np.where(arr > self.b, 0.0, out)
        if np.ndim(out) == 0:
            return float(out)
        return out

    def peak(self) -> float:
        if self.kind == "tabulated":
            return self.amplitude * max(v for _, v in self.samples)
        return self.amplitude

    def breakpoints(self) -> np.ndarray:
        """Radii in ``[0, b]`` where the profile may be non-smooth."""
        if self.kind == "tabulated":
            return self._table()[0]
        return np.array([0.0, self.b])

    def _table(self) -> tuple[np.ndarray, np.ndarray]:
        pts = np.asarray(self.samples, dtype=float)
        return pts[:, 0], self.amplitude * pts[:, 1]


def _check_samples(samples: Sequence[tuple[float, float]], b: float) -> None:
    if len(samples) < 2:
        raise ValueError("tabulated potential needs at least two samples")
    rs = [float(r) for r, _ in samples]
    vs = [float(v) for _, v in samples]
    if rs[0] != 0.0:
        raise ValueError("first sample must sit at r = 0")
    if any(r2 <= r1 for r1, r2 in zip(rs, rs[1:])):
        raise ValueError("sample radii must be strictly increasing")
    if any(v < 0 or not math.isfinite(v) for v in vs):
        raise ValueError("sample values must be finite and nonnegative")
    if vs[-1] != 0.0:
        raise ValueError("tabulated profile must end with v(b) = 0")
    if not math.isclose(rs[-1], b, rel_tol=0, abs_tol=1e-15 * max(1.0, b)):
        raise ValueError(f"last sample radius {rs[-1]} must equal support radius b={b}")


def indicator(b: float = 1.0, amplitude: float = 1.0) -> Potential:
    """Indicator of the ball of radius ``b`` (the analytic benchmark)."""
    return Potential("indicator", float(b), float(amplitude))


def smooth_bump(b: float = 1.0, amplitude: float = 1.0) -> Potential:
    """``amplitude * exp(1 - 1/(1 - (r/b)^2))`` inside the ball, zero outside."""
    return Potential("smooth_bump", float(b), float(amplitude))


def tabulated(samples: Sequence[tuple[float, float]], amplitude: float = 1.0) -> Potential:
    """Piecewise-linear profile through ``(r, v)`` samples; ``b`` is the last radius."""
    pts = tuple((float(r), float(v)) for r, v in samples)
    if not pts:
        raise ValueError("tabulated potential needs samples")
    return Potential("tabulated", pts[-1][0], float(amplitude), pts)


def from_mapping(cfg: dict) -> Potential:
    """Build a potential from a ``[potential]`` config section."""
    kind = cfg.get("kind", "indicator")
    amplitude = float(cfg.get("amplitude", 1.0))
    if kind == "tabulated":
        if "samples" not in cfg:
            raise ValueError("potential.samples is required for kind='tabulated'")
        pot = tabulated(cfg["samples"], amplitude)
        if "b" in cfg and not math.isclose(float(cfg["b"]), pot.b):
            raise ValueError("potential.b disagrees with the last sample radius")
        return pot
    if "samples" in cfg:
        raise ValueError("potential.samples is only valid for kind='tabulated'")
    return Potential(kind, float(cfg.get("b", 1.0)), amplitude)


def radial_quadrature(p: Potential, n: int = 64) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre nodes/weights on ``[0, b]``, split at breakpoints."""
    x, w = np.polynomial.legendre.leggauss(n)
    edges = p.breakpoints()
    nodes, weights = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        half = 0.5 * (hi - lo)
        nodes.append(lo + half * (x + 1.0))
        weights.append(half * w)
    return np.concatenate(nodes), np.concatenate(weights)


def potential_norms(p: Potential, n: int = 200) -> tuple[float, float]:
    """Return ``(integral of v over R^3, max v)``."""
    r, w = radial_quadrature(p, n)
    total = 4.0 * math.pi * float(np.sum(w * p.evaluate(r) * r * r))
    vmax = p.peak()
    if total <= 0 or vmax <= 0:
        raise ValueError("potential is identically zero")
    return total, vmax
