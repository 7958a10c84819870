"""``thermoscope`` command line.

Every subcommand reads a map spec and (except ``map-table``) a potential
spec, both JSON, and writes its tables and reports into ``--out``. Each
output carries the resolved run configuration so a rerun with the same
inputs reproduces it byte for byte.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import circle_map, potential
from .exceptions import DomainError, NumericError, ResourceError, SpecError, ThermoscopeError
from .pressure import PressureConfig, PressureSolver, pressure_curve, transition_points
from .spectra import birkhoff_spectrum, delta_regions, rate_function
from .transfer_op import spectral_report, spectral_sweep, ulam_matrix

EXIT_OK, EXIT_FAIL, EXIT_SPEC, EXIT_NUMERIC, EXIT_RESOURCE = 0, 1, 2, 3, 4


# ------------------------------------------------------------------ output

def _num(x):
    """JSON-safe float: non-finite values become strings."""
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(x, dict):
        return {str(k): _num(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, np.ndarray)):
        return [_num(v) for v in x]
    return x


def _cell(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.17g}"


def write_json(path: Path, payload: dict) -> None:
    text = json.dumps(_num(payload), indent=2, sort_keys=True, allow_nan=False)
    path.write_text(text + "\n", encoding="utf-8")


def write_table(out: Path, stem: str, columns, rows, config: dict, fmt: str) -> Path:
    """CSV with a ``# config:`` header line, or JSON with a ``config`` field."""
    if fmt == "json":
        path = out / f"{stem}.json"
        write_json(path, {"config": config, "columns": list(columns),
                          "rows": [[_num(v) for v in r] for r in rows]})
        return path
    path = out / f"{stem}.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write("# config: " + json.dumps(_num(config), sort_keys=True) + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_cell(v) for v in r])
    return path


# ------------------------------------------------------------------- input

def load_json(path) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise SpecError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecError(f"{path}: malformed JSON at line {exc.lineno}, column {exc.colno}: "
                        f"{exc.msg}") from exc


class Run:
    """Parsed arguments plus the objects built from the specs."""

    def __init__(self, args):
        self.args = args
        self.map_spec = load_json(args.map)
        self.cmap = circle_map.from_spec(self.map_spec)
        self.pot_spec = None
        self.phi = None
        if getattr(args, "potential", None) is not None:
            self.pot_spec = load_json(args.potential)
            self.phi = potential.from_spec(self.pot_spec, self.cmap)
        if args.t_min >= args.t_max:
            raise DomainError("t window is empty: need --t-min < --t-max")
        if args.t_samples < 5:
            raise DomainError("--t-samples must be at least 5")
        if args.ulam_n < self.cmap.degree:
            raise DomainError(f"--ulam-n {args.ulam_n} is below the map degree {self.cmap.degree}")
        try:
            self.pcfg = PressureConfig(ulam_n=args.ulam_n, n_max=args.n_max, window=args.window,
                                       max_iter=args.max_iter, tol_flat=args.tol_flat,
                                       tol_strict=args.tol_strict, max_period=args.max_period)
        except ValueError as exc:
            raise DomainError(str(exc)) from exc
        self.out = Path(args.out)
        self.out.mkdir(parents=True, exist_ok=True)

    def need_potential(self):
        if self.phi is None:
            raise SpecError(f"{self.args.command} needs --potential")

    @property
    def t_grid(self) -> np.ndarray:
        return np.linspace(self.args.t_min, self.args.t_max, self.args.t_samples)

    def config(self, **extra) -> dict:
        a = self.args
        cfg = {
            "command": a.command,
            "map": self.map_spec,
            "potential": self.pot_spec,
            "t_min": a.t_min, "t_max": a.t_max, "t_samples": a.t_samples,
            "format": a.format, "seed": a.seed,
            "pressure": self.pcfg.to_dict(),
            "threads": self.pcfg.n_threads(),
        }
        cfg.update(extra)
        return cfg


# --------------------------------------------------------------- commands

def cmd_pressure(run: Run) -> dict:
    run.need_potential()
    solver = PressureSolver(run.cmap, run.phi, run.pcfg)
    curve = pressure_curve(run.cmap, run.phi, run.t_grid, run.pcfg, solver)
    config = run.config()
    write_table(run.out, "pressure_curve",
                ["t", "P_norm_growth", "P_ulam", "P_reconciled", "d1", "d2", "zone", "confidence"],
                list(curve.rows()), config, run.args.format)
    anchors = {}
    for name, t in (("P0", 0.0), ("P1", 1.0)):
        pt = solver.at(t)
        value = curve.h_top + t * curve.beta_max if curve.cohomologous else pt.value
        anchors[name] = {"t": t, "value": value, "confidence": pt.confidence,
                         "norm_growth": pt.norm_growth, "ulam": pt.ulam,
                         "ulam_fine": pt.ulam_fine, "converged": pt.converged}
    summary = {
        "config": config,
        "P(0)": anchors["P0"]["value"], "P(1)": anchors["P1"]["value"],
        "anchors": anchors,
        "confidence": float(np.max(curve.confidence)),
        "h_top": curve.h_top,
        "cohomologous": curve.cohomologous,
        "beta_max": curve.beta_max, "beta_min": curve.beta_min,
        "convexity_defect": curve.convexity_defect(),
        "warnings": list(curve.warnings),
    }
    write_json(run.out / "summary.json", summary)
    return summary


def cmd_transitions(run: Run) -> dict:
    run.need_potential()
    a = run.args
    if not a.t_min < 0 < a.t_max:
        raise DomainError("transition search needs 0 strictly inside the t window")
    solver = PressureSolver(run.cmap, run.phi, run.pcfg)
    report = transition_points(run.cmap, run.phi, run.pcfg, a.t_min, a.t_max, a.t_samples,
                               solver=solver)
    config = run.config(gap_samples=a.gap_samples)
    payload = {"config": config, **report.to_dict()}
    write_json(run.out / "transitions.json", payload)
    ts = np.linspace(a.t_min, a.t_max, a.gap_samples)
    period = min(10, run.pcfg.period_limit(run.cmap.degree))
    rows = [(r["t"], r["lam"], r["sub"], r["ratio"], r["ess_bound"], r["certificate"])
            for r in spectral_sweep(run.cmap, run.phi, ts, n=a.ulam_n, max_period=period)]
    write_table(run.out, "gap_sweep", ["t", "lambda1", "abs_lambda2", "ratio", "ess_bound",
                                       "certificate"], rows, config, a.format)
    return payload


def cmd_spectrum(run: Run) -> dict:
    run.need_potential()
    a = run.args
    if not a.t_min < 0 < a.t_max:
        raise DomainError("spectrum needs 0 strictly inside the t window")
    solver = PressureSolver(run.cmap, run.phi, run.pcfg)
    curve = pressure_curve(run.cmap, run.phi, run.t_grid, run.pcfg, solver)
    report = transition_points(run.cmap, run.phi, run.pcfg, a.t_min, a.t_max, curve=curve,
                               solver=solver)
    rate = rate_function(curve, report, n_s=a.s_samples)
    config = run.config(intervals=[list(iv) for iv in a.interval], s_samples=a.s_samples)
    if rate.degenerate:
        grid = np.array([rate.s_star])
    else:
        grid = np.unique(np.concatenate([np.linspace(rate.beta_min, rate.beta_max, a.s_samples),
                                         [rate.lam_min, rate.lam_max, rate.s_star]]))
    rows = []
    for s in grid:
        i = rate(float(s))
        rows.append((s, i, rate.h_top - i, rate.zone_of(float(s))))
    write_table(run.out, "rate", ["s", "I", "tau_hat", "zone"], rows, config, a.format)
    results, warns = [], []
    for lo, hi in a.interval:
        try:
            res = birkhoff_spectrum(rate, lo, hi)
        except DomainError as exc:
            results.append({"interval": [lo, hi], "error": str(exc)})
            warns.append(f"[{lo}, {hi}]: {exc}")
            continue
        entry = res.to_dict()
        entry["label"] = res.region
        results.append(entry)
        warns.extend(f"[{lo}, {hi}]: {w}" for w in res.warnings)
    payload = {
        "config": config,
        "h_top": rate.h_top, "s_star": rate.s_star,
        "lam_min": rate.lam_min, "lam_max": rate.lam_max,
        "spectrum": [rate.beta_min, rate.beta_max],
        "t1": report.t1, "t2": report.t2,
        "regions": delta_regions(rate).describe(),
        "intervals": results,
        "warnings": list(curve.warnings) + warns,
    }
    write_json(run.out / "spectrum.json", payload)
    return payload


def map_rows(cmap, samples: int):
    """``(x, f, Df_left, Df_right, kind)`` on a uniform grid plus every break point."""
    grid = np.linspace(0.0, 1.0, samples, endpoint=False)
    brk = np.asarray(cmap.break_points, dtype=float)
    xs = np.unique(np.concatenate([grid, brk]))
    fx = cmap.eval(xs)
    dl = cmap.deriv(xs, "left")
    dr = cmap.deriv(xs, "right")
    is_break = np.isin(xs, brk)
    for i, x in enumerate(xs):
        yield (x, fx[i], dl[i], dr[i], "break" if is_break[i] else "sample")


def cmd_map_table(run: Run) -> dict:
    a = run.args
    if a.samples < 2:
        raise DomainError("--samples must be at least 2")
    config = run.config(samples=a.samples)
    rows = list(map_rows(run.cmap, a.samples))
    path = write_table(run.out, "map", ["x", "f", "Df_left", "Df_right", "kind"], rows, config,
                       a.format)
    return {"rows": len(rows), "path": str(path)}


def cmd_spectral_report(run: Run) -> dict:
    run.need_potential()
    a = run.args
    phi = run.phi.scale(a.t) if a.t != 1.0 else run.phi
    rep = spectral_report(run.cmap, phi, n=a.ulam_n, alpha=a.alpha)
    config = run.config(t=a.t, alpha=a.alpha, dump_vectors=a.dump_vectors)
    payload = {
        "config": config,
        "lambda1": rep.lam, "log_lambda1": rep.log_lam,
        "abs_lambda2": rep.subleading, "gap_ratio": rep.gap_ratio,
        "ess_bound": rep.ess_bound, "certificate": rep.certificate,
        "converged": rep.converged, "iterations": rep.iterations,
        "flags": list(rep.flags),
    }
    write_json(run.out / "spectral_report.json", payload)
    if a.dump_vectors:
        nodes = rep.h.nodes
        write_table(run.out, "eigenfunction", ["x", "h", "nu"],
                    list(zip(nodes, rep.h.values, rep.nu)), config, a.format)
        U = ulam_matrix(run.cmap, phi, a.ulam_n)
        write_table(run.out, "cells", ["left", "right", "width"],
                    list(zip(U.edges[:-1], U.edges[1:], U.widths)), config, a.format)
    return payload


COMMANDS = {
    "pressure": cmd_pressure,
    "transitions": cmd_transitions,
    "spectrum": cmd_spectrum,
    "map-table": cmd_map_table,
    "spectral-report": cmd_spectral_report,
}


# ------------------------------------------------------------------ parser

def _interval(text: str):
    try:
        lo, hi = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"interval must be 'a,b', got {text!r}") from None
    if lo > hi:
        raise argparse.ArgumentTypeError(f"interval {text!r} has a > b")
    return lo, hi


def _positive(kind):
    def conv(text):
        v = kind(text)
        if not v > 0:
            raise argparse.ArgumentTypeError(f"expected a positive value, got {text}")
        return v
    return conv


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--map", required=True, metavar="FILE", help="map spec (JSON)")
    common.add_argument("--potential", metavar="FILE", help="potential spec (JSON)")
    common.add_argument("--t-min", type=float, default=-3.0)
    common.add_argument("--t-max", type=float, default=3.0)
    common.add_argument("--t-samples", type=int, default=61)
    common.add_argument("--ulam-n", type=int, default=1024)
    common.add_argument("--n-max", type=int, default=60, help="norm-growth iterations")
    common.add_argument("--window", type=int, default=10, help="norm-growth fit window")
    common.add_argument("--max-iter", type=int, default=20000, help="power iteration cap")
    common.add_argument("--tol-flat", type=_positive(float), default=1e-4)
    common.add_argument("--tol-strict", type=_positive(float), default=1e-4)
    common.add_argument("--max-period", type=int, default=None)
    common.add_argument("--out", default=".", metavar="DIR")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--seed", type=int, default=0, help="reserved; the pipeline is deterministic")

    parser = argparse.ArgumentParser(prog="thermoscope",
                                     description="Pressure, transitions and Birkhoff spectra "
                                                 "of expanding circle maps.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("pressure", parents=[common], help="sampled pressure curve")
    p = sub.add_parser("transitions", parents=[common], help="t1, t2 and spectral gap sweep")
    p.add_argument("--gap-samples", type=int, default=25)
    p = sub.add_parser("spectrum", parents=[common], help="rate function and interval spectra")
    p.add_argument("--interval", type=_interval, action="append", default=[], metavar="A,B")
    p.add_argument("--s-samples", type=int, default=401)
    p = sub.add_parser("map-table", parents=[common], help="samples of f and Df")
    p.add_argument("--samples", type=int, default=1001)
    p = sub.add_parser("spectral-report", parents=[common], help="leading spectral data at one t")
    p.add_argument("--t", type=float, default=1.0, help="evaluate the operator of t * phi")
    p.add_argument("--alpha", type=float, default=None, help="Hoelder exponent override")
    p.add_argument("--dump-vectors", action="store_true")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_SPEC
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            run = Run(args)
            COMMANDS[args.command](run)
    except ResourceError as exc:
        print(f"thermoscope: resource cap: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except NumericError as exc:
        print(f"thermoscope: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (SpecError, DomainError) as exc:
        print(f"thermoscope: invalid input: {exc}", file=sys.stderr)
        return EXIT_SPEC
    except ThermoscopeError as exc:
        print(f"thermoscope: {exc}", file=sys.stderr)
        return getattr(exc, "exit_code", EXIT_FAIL)
    except ValueError as exc:
        print(f"thermoscope: invalid input: {exc}", file=sys.stderr)
        return EXIT_SPEC
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"thermoscope: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def entry() -> None:
    sys.exit(main())
