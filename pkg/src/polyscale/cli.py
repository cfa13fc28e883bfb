"""Command-line front end.

Exit codes: 0 success, 1 module failure, 2 invalid input, 3 Monte-Carlo
disagreement, 4 band failure, 5 too many failed sweep points. Failures are
reported on stderr as a one-line JSON object.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path

from . import io as pio
from . import spectral
from .config import ConfigError, RunConfig, load
from .errors import PolyscaleError, WindowError
from .propagator import endpoint_density, feynman_kac_mc, moments
from .scaling import RegimeReport, SweepError, SweepSpec, run_sweep

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_INVALID = 2
EXIT_MC = 3
EXIT_BAND = 4
EXIT_POINTS = 5

MC_SIGMAS = 3.0

log = logging.getLogger("polyscale")


class _Exit(Exception):
    def __init__(self, code: int, kind: str, message: str, **extra):
        super().__init__(message)
        self.code, self.kind, self.extra = code, kind, extra


def _out_dir(args, cfg: RunConfig) -> Path:
    return Path(args.out if args.out is not None else cfg.output.directory)


def _write(args, cfg: RunConfig, name: str, text: str) -> None:
    fmt = name.rsplit(".", 1)[-1]
    if fmt in cfg.output.formats:
        path = pio.atomic_write(_out_dir(args, cfg) / name, text)
        log.info("wrote %s", path)


def _print_json(obj) -> None:
    sys.stdout.write(pio.dumps(obj))


def _critical(cfg: RunConfig, *, full: bool) -> spectral.CriticalData:
    n = cfg.spectral.n_nodes
    if full:
        return spectral.critical_data(cfg.potential, n)
    return spectral.beta_critical(cfg.potential, n)


def cmd_spectral(args, cfg: RunConfig) -> int:
    crit = _critical(cfg, full=True)
    curve = spectral.spectral_curve(cfg.potential, cfg.spectral.grid(), cfg.spectral.n_nodes)
    _write(args, cfg, "sigma0.csv", pio.curve_csv(curve))
    _write(args, cfg, "critical.json", pio.critical_json(crit, curve))
    _print_json(crit.to_dict())
    return EXIT_OK


def cmd_betacrit(args, cfg: RunConfig) -> int:
    crit = _critical(cfg, full=True)
    _write(args, cfg, "critical.json", pio.critical_json(crit))
    _print_json(crit.to_dict())
    return EXIT_OK


def cmd_radius(args, cfg: RunConfig) -> int:
    crit = _critical(cfg, full=False)
    rec = moments(cfg.potential, args.beta, args.t, cfg.solver, crit)
    doc = {"pde": pio.record_dict(rec)}
    code = EXIT_OK
    if args.mc:
        mc = feynman_kac_mc(cfg.potential, args.beta, args.t, cfg.solver)
        z_dev = abs(mc.Z.mean - rec.Z) / mc.Z.stderr if mc.Z.stderr > 0 else (0.0 if mc.Z.mean == rec.Z else math.inf)
        r_dev = abs(mc.r - rec.r) / mc.r_stderr if mc.r_stderr > 0 else 0.0
        agree = z_dev <= MC_SIGMAS and r_dev <= MC_SIGMAS
        doc["mc"] = {
            "Z": mc.Z.mean,
            "Z_stderr": mc.Z.stderr,
            "m2": mc.m2.mean,
            "m2_stderr": mc.m2.stderr,
            "r": mc.r,
            "r_stderr": mc.r_stderr,
            "n_paths": mc.Z.n_paths,
            "method": cfg.solver.mc_method,
            "seed": cfg.solver.seed,
            "Z_deviation_sigmas": z_dev,
            "r_deviation_sigmas": r_dev,
            "agree": agree,
        }
        if not agree:
            code = EXIT_MC
    _print_json(doc)
    if code == EXIT_MC:
        raise _Exit(EXIT_MC, "McDisagreement", f"PDE and Monte-Carlo differ by more than {MC_SIGMAS:g} stderr",
                    Z_deviation_sigmas=doc["mc"]["Z_deviation_sigmas"], r_deviation_sigmas=doc["mc"]["r_deviation_sigmas"])
    return code


def cmd_density(args, cfg: RunConfig) -> int:
    dens = endpoint_density(cfg.potential, args.beta, args.t, cfg.solver)
    _write(args, cfg, "density.csv", pio.density_csv(dens))
    _print_json({"beta": args.beta, "t": args.t, "n_points": len(dens.r), "normalization": dens.total()})
    return EXIT_OK


def _sweep(args, cfg: RunConfig) -> RegimeReport:
    crit = _critical(cfg, full=False)
    sw = cfg.sweep
    spec = SweepSpec(
        potential=cfg.potential,
        crit=crit,
        beta_offsets=sw.beta_offsets,
        t_values=sw.t_values,
        chi_values=sw.chi_values,
        chi_t_values=sw.chi_t_values,
        solver=cfg.solver,
        window=sw.window,
        band_bound=sw.band_bound,
    )
    try:
        report = run_sweep(spec, jobs=args.jobs)
    except SweepError as exc:
        _emit_report(args, cfg, exc.report)
        raise _Exit(EXIT_POINTS, "SweepError", str(exc),
                    failures=[{"beta": b, "t": t, "error": e} for b, t, e in exc.report.failures]) from exc
    _emit_report(args, cfg, report)
    return report


def _emit_report(args, cfg: RunConfig, report: RegimeReport) -> None:
    _write(args, cfg, "sweep.csv", pio.sweep_csv(report))
    _write(args, cfg, "report.json", pio.report_json(report))
    table = pio.summary_table(report)
    if "csv" in cfg.output.formats or "json" in cfg.output.formats:
        pio.atomic_write(_out_dir(args, cfg) / "summary.txt", table)
    sys.stdout.write(table)


def cmd_sweep(args, cfg: RunConfig) -> int:
    _sweep(args, cfg)
    return EXIT_OK


def cmd_verify(args, cfg: RunConfig) -> int:
    report = _sweep(args, cfg)
    if not report.passed:
        raise _Exit(EXIT_BAND, "BandFailure", "scaling band bound exceeded",
                    band1=report.band1.verdict, band2=report.band2.verdict)
    return EXIT_OK


COMMANDS = {
    "spectral": cmd_spectral,
    "betacrit": cmd_betacrit,
    "radius": cmd_radius,
    "sweep": cmd_sweep,
    "verify": cmd_verify,
    "density": cmd_density,
}


def _positive(kind):
    def parse(text):
        val = kind(text)
        if not val > 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return val
    return parse


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="run configuration (TOML)")
    common.add_argument("--out", help="output directory (overrides output.directory)")
    common.add_argument("--seed", type=int, help="random seed (overrides solver.seed)")
    common.add_argument("--jobs", type=_positive(int), default=os.cpu_count() or 1, help="worker processes")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    parser = argparse.ArgumentParser(prog="polyscale", description="Critical coupling and polymer radius scaling.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("spectral", parents=[common], help="sigma0(k) curve and critical data")
    sub.add_parser("betacrit", parents=[common], help="critical coupling and curvature constant")
    for name, text in (("radius", "moments and radius at one point"), ("density", "endpoint density at one point")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("--beta", type=float, required=True)
        p.add_argument("--t", type=_positive(float), required=True)
        if name == "radius":
            p.add_argument("--mc", action="store_true", help="add the Monte-Carlo cross-check")
    sub.add_parser("sweep", parents=[common], help="run the (beta, t) sweep")
    sub.add_parser("verify", parents=[common], help="run the sweep and check both scaling bands")
    return parser


def _fail(code: int, kind: str, message: str, **extra) -> int:
    doc = {"error": kind, "message": message, "exit_code": code}
    doc.update(extra)
    sys.stderr.write(json.dumps(pio._clean(doc), sort_keys=False) + "\n")
    return code


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        if exc.code in (0, None):
            return EXIT_OK
        return _fail(EXIT_INVALID, "UsageError", "invalid command line")
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = load(args.config)
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
        return COMMANDS[args.command](args, cfg)
    except _Exit as exc:
        return _fail(exc.code, exc.kind, str(exc), **exc.extra)
    except FileNotFoundError as exc:
        return _fail(EXIT_INVALID, "FileNotFoundError", str(exc))
    except (ConfigError, WindowError) as exc:
        return _fail(EXIT_INVALID, type(exc).__name__, str(exc))
    except PolyscaleError as exc:
        return _fail(EXIT_FAILURE, type(exc).__name__, str(exc))
    except ValueError as exc:
        return _fail(EXIT_INVALID, type(exc).__name__, str(exc))
    except Exception as exc:  # noqa: BLE001 - every failure must surface as JSON
        return _fail(EXIT_FAILURE, type(exc).__name__, str(exc))


if __name__ == "__main__":
    sys.exit(main())
