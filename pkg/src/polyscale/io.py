"""CSV/JSON artifacts. Floats are written with 17 significant digits so that
reruns are byte-identical and values round-trip exactly."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

from .propagator import MOMENT_HEADER, EndpointDensity, MomentRecord
from .scaling import AlphaFit, BandSummary, RegimeReport, band_ratio
from .spectral import CriticalData, SpectralCurve

SWEEP_HEADER = MOMENT_HEADER + ("band_ratio",)


def fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (int,)) and not isinstance(x, bool):
        return str(x)
    return format(float(x), ".17g")


def _clean(obj):
    # JSON has no NaN: map it to null
    if isinstance(obj, float):
        return None if math.isnan(obj) or math.isinf(obj) else obj
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if hasattr(obj, "item"):
        return _clean(obj.item())
    return obj


def dumps(obj) -> str:
    return json.dumps(_clean(obj), indent=2, allow_nan=False) + "\n"


def atomic_write(path: str | Path, text: str) -> Path:
    """Write ``text`` to a temporary file beside ``path`` and rename it into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _csv(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def curve_csv(curve: SpectralCurve) -> str:
    return _csv(("k", "sigma0"), zip(curve.k, curve.sigma0))


def critical_json(crit: CriticalData, curve: SpectralCurve | None = None) -> str:
    doc = crit.to_dict()
    if curve is not None:
        doc["k"] = [float(k) for k in curve.k]
        doc["sigma0"] = [float(s) for s in curve.sigma0]
    return dumps(doc)


def record_dict(rec: MomentRecord) -> dict:
    return {name: getattr(rec, name) for name in MOMENT_HEADER}


def records_csv(records: Iterable[MomentRecord]) -> str:
    return _csv(MOMENT_HEADER, (rec.as_row() for rec in records))


def sweep_csv(report: RegimeReport) -> str:
    rows = (rec.as_row() + (band_ratio(rec, report.beta_cr),) for rec in report.records)
    return _csv(SWEEP_HEADER, rows)


def density_csv(density: EndpointDensity) -> str:
    return _csv(("r", "q"), zip(density.r, density.q))


def read_records_csv(text: str) -> list[MomentRecord]:
    rows = list(csv.reader(io.StringIO(text)))
    header = tuple(rows[0])
    if header[: len(MOMENT_HEADER)] != MOMENT_HEADER:
        raise ValueError(f"unexpected header {header}")
    out = []
    for row in rows[1:]:
        vals = [float(v) for v in row[:8]]
        out.append(MomentRecord(*vals, row[8]))
    return out


def _band_dict(band: BandSummary, name: str) -> dict:
    return {
        "quantity": name,
        "n_points": band.n_points,
        "ratio_min": band.ratio_min,
        "ratio_max": band.ratio_max,
        "spread": band.spread,
        "verdict": band.verdict,
    }


def _fit_dict(fit: AlphaFit, key: str) -> dict:
    return {key: fit.key, "value": fit.value, "residual": fit.residual, "n_points": fit.n_points, "error": fit.error}


def report_json(report: RegimeReport) -> str:
    doc = {
        "verdict": {
            "band1": report.band1.verdict,
            "band2": report.band2.verdict,
            "overall": "pass" if report.passed else "fail",
        },
        "beta_cr": report.beta_cr,
        "band1": _band_dict(report.band1, "r*(beta-beta_cr) over chi>=1"),
        "band2": _band_dict(report.band2, "r/sqrt(t) over chi<=1"),
        "alpha_plus": [_fit_dict(f, "beta") for f in report.alpha_plus],
        "alpha_minus": [_fit_dict(f, "chi") for f in report.alpha_minus],
        "failures": [{"beta": b, "t": t, "error": e} for b, t, e in report.failures],
        "findings": list(report.findings),
        "n_records": len(report.records),
    }
    return dumps(doc)


def summary_table(report: RegimeReport) -> str:
    lines = [
        f"{'band':<8}{'points':>8}{'min':>12}{'max':>12}{'max/min':>10}  verdict",
    ]
    for name, band in (("chi>=1", report.band1), ("chi<=1", report.band2)):
        lines.append(
            f"{name:<8}{band.n_points:>8}{band.ratio_min:>12.5g}{band.ratio_max:>12.5g}"
            f"{band.spread:>10.4g}  {band.verdict}"
        )
    for fit in report.alpha_minus:
        if fit.ok:
            lines.append(f"alpha_minus(chi={fit.key:+.3g}) = {fit.value:.6g}")
    for fit in report.alpha_plus:
        if fit.ok:
            lines.append(f"alpha_plus(beta={fit.key:.6g}) = {fit.value:.6g}")
    if report.failures:
        lines.append(f"{len(report.failures)} failed point(s)")
    return "\n".join(lines) + "\n"
