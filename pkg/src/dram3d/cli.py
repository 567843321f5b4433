"""dram3d command line.

    dram3d evaluate --profile si3d --layers 137
    dram3d sweep --profile aos3d --from 10 --to 200 --step 10 --out sweep.csv --svg
    dram3d compare
    dram3d calibrate --out calibrated.json
    dram3d feasibility --min-pitch 0.4
    dram3d reproduce-paper --out results/

The scenario comes from --config, else $DRAM3D_CONFIG, else the shipped
calibrated scenario. Exit codes: 0 ok, 1 reproduce-paper check mismatch,
2 input error, 3 calibration did not converge.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path
from typing import Sequence

from . import report
from .calibration import CalibrationError
from .projection import (
    REPORT_COLUMNS,
    calibrate,
    compare_report,
    evaluate_profile,
    observe,
    sweep_profile,
)
from .reproduce import run_checks
from .scenario import Scenario, load_scenario
from .svg import line_plot
from .topology import Scheme, feasibility

EXIT_OK, EXIT_MISMATCH, EXIT_INPUT, EXIT_UNCONVERGED = 0, 1, 2, 3

REPRODUCE_SWEEP = range(10, 201, 10)


class InputError(Exception):
    pass


def _scenario(args) -> Scenario:
    path = args.config or os.environ.get("DRAM3D_CONFIG") or None
    s = load_scenario(path)
    if getattr(args, "min_pitch", None) is not None:
        if args.min_pitch <= 0:
            raise InputError("--min-pitch must be > 0")
        s = dataclasses.replace(s, min_pitch=args.min_pitch)
    return s


def _profile_names(s: Scenario, args) -> list[str]:
    names = args.profile or s.profile_names
    for n in names:
        if n not in s.profile_names:
            raise InputError(f"unknown profile {n!r} (have {', '.join(s.profile_names)})")
    return names


def _check_layers(s: Scenario, name: str, layers: int | None):
    if layers is None:
        return
    if not s.profile(name).is_3d:
        raise InputError(f"--layers given for planar profile {name!r}, which has no layer count")
    if layers < 1:
        raise InputError("--layers must be >= 1")


def _emit(text: str, out: str | None):
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


# -- subcommands -----------------------------------------------------------------

def cmd_evaluate(args) -> int:
    s = _scenario(args)
    names = _profile_names(s, args)
    for n in names:
        _check_layers(s, n, args.layers)
    reports = [evaluate_profile(s, n, args.layers if s.profile(n).is_3d else None, args.scheme)
               for n in names]
    if args.csv:
        text = report.to_csv(REPORT_COLUMNS, [r.row() for r in reports])
    else:
        docs = [r.to_dict() for r in reports]
        text = report.to_json(docs[0] if len(docs) == 1 else docs)
    _emit(text, args.out)
    return EXIT_OK


def _sweep_plots(name: str, reports) -> dict[str, str]:
    density = [r.bit_density for r in reports]
    layers = [r.n_layers for r in reports]
    margin = line_plot(
        [(f"{name} clean", density, [r.sense_margin for r in reports]),
         (f"{name} after disturb", density, [r.margin_after_disturb for r in reports])],
        f"{name}: sense margin vs density", "bit density (Gb/mm2)", "sense margin (mV)")
    height = line_plot([(name, layers, [r.stack_height for r in reports])],
                       f"{name}: stack height vs layers", "layers", "stack height (um)")
    return {"margin_vs_density": margin, "height_vs_layers": height}


def cmd_sweep(args) -> int:
    s = _scenario(args)
    if not args.profile or len(args.profile) != 1:
        raise InputError("sweep needs exactly one --profile")
    name = args.profile[0]
    _profile_names(s, args)
    if not s.profile(name).is_3d:
        raise InputError(f"cannot sweep layers of planar profile {name!r}")
    if args.step < 1:
        raise InputError("--step must be >= 1")
    if args.start < 1:
        raise InputError("--from must be >= 1")
    layers = list(range(args.start, args.stop + 1, args.step))
    if not layers:
        raise InputError(f"empty layer range {args.start}..{args.stop}")
    if args.svg and not args.out:
        raise InputError("--svg needs --out to place the plots")
    reports = sweep_profile(s, name, layers, args.scheme)
    _emit(report.to_csv(REPORT_COLUMNS, [r.row() for r in reports]), args.out)
    if args.svg:
        out = Path(args.out)
        for tag, svg in _sweep_plots(name, reports).items():
            out.with_name(f"{out.stem}_{tag}.svg").write_text(svg, encoding="utf-8")
    return EXIT_OK


def _comparison(s: Scenario, names, scheme):
    reports = [evaluate_profile(s, n, None, scheme if s.profile(n).is_3d else None) for n in names]
    return compare_report(reports)


def cmd_compare(args) -> int:
    s = _scenario(args)
    names = _profile_names(s, args)
    if len(names) < 2:
        raise InputError("compare needs at least two profiles")
    table = _comparison(s, names, args.scheme)
    if args.csv:
        text = report.to_csv(table.columns, table.rows)
    else:
        text = report.text_table(*report.transpose(table.columns, table.rows, "profile"))
    _emit(text, args.out)
    return EXIT_OK


def _residual_rows(s: Scenario) -> list[dict]:
    rows = []
    for a in s.calibration.anchors:
        model = observe(s, a)
        rows.append({"anchor": a.name, "unit": a.unit, "target": a.target, "model": model,
                     "residual": (model - a.target) / abs(a.target) if a.target else model,
                     "weight": a.weight})
    return rows


_RESIDUAL_COLUMNS = ("anchor", "unit", "target", "model", "residual", "weight")


def _run_calibration(s: Scenario, max_sweeps: int | None):
    opts = {} if max_sweeps is None else {"max_sweeps": max_sweeps}
    result, fitted = calibrate(s, **opts)
    residuals = report.text_table(_RESIDUAL_COLUMNS, _residual_rows(fitted))
    return result, fitted, residuals


def cmd_calibrate(args) -> int:
    s = _scenario(args)
    result, fitted, residuals = _run_calibration(s, args.max_sweeps)
    if not result.converged:
        sys.stderr.write(f"calibration did not converge after {result.sweeps} sweeps\n")
        sys.stderr.write(residuals)
        return EXIT_UNCONVERGED
    params = [{"parameter": k, "value": v} for k, v in result.values.items()]
    sys.stdout.write(report.text_table(("parameter", "value"), params))
    sys.stdout.write("\n")
    sys.stdout.write(residuals)
    if args.out:
        Path(args.out).write_text(fitted.dumps(), encoding="utf-8")
    return EXIT_OK


_FEAS_COLUMNS = ("profile", "n_layers", "scheme", "hcb_pitch", "min_pitch", "margin", "verdict")


def cmd_feasibility(args) -> int:
    s = _scenario(args)
    names = [n for n in _profile_names(s, args) if s.profile(n).is_3d]
    if not names:
        raise InputError("feasibility applies to stacked3d profiles only")
    for n in names:
        _check_layers(s, n, args.layers)
    schemes = [Scheme(args.scheme)] if args.scheme else list(Scheme)
    rows = []
    for n in names:
        for sc in schemes:
            cfg = s.config(n, args.layers, sc)
            f = feasibility(cfg, s.min_pitch)
            rows.append({"profile": n, "n_layers": cfg.n_layers, "scheme": sc.value,
                         "hcb_pitch": f.pitch, "min_pitch": f.min_pitch, "margin": f.margin,
                         "verdict": f.verdict})
    text = (report.to_csv if args.csv else report.text_table)(_FEAS_COLUMNS, rows)
    _emit(text, args.out)
    return EXIT_OK


def cmd_reproduce(args) -> int:
    s = _scenario(args)
    result, fitted, residuals = _run_calibration(s, None)
    if not result.converged:
        sys.stderr.write(f"calibration did not converge after {result.sweeps} sweeps\n")
        sys.stderr.write(residuals)
        return EXIT_UNCONVERGED
    names = fitted.profile_names
    table = _comparison(fitted, names, None)
    stacked = [n for n in names if fitted.profile(n).is_3d]
    sweeps = {n: sweep_profile(fitted, n, REPRODUCE_SWEEP) for n in stacked}
    checks = run_checks(fitted)
    check_rows = [{"check": c.name, "value": c.value, "expected": c.criterion,
                   "result": "PASS" if c.passed else "FAIL"} for c in checks]
    n_pass = sum(c.passed for c in checks)

    out = sys.stdout
    out.write(f"calibration: converged in {result.sweeps} sweeps\n\n")
    out.write(residuals + "\n")
    out.write(report.text_table(*report.transpose(table.columns, table.rows, "profile")) + "\n")
    out.write(report.text_table(("check", "value", "expected", "result"), check_rows))
    out.write(f"\n{n_pass}/{len(checks)} checks passed\n")

    if args.out:
        d = Path(args.out)
        d.mkdir(parents=True, exist_ok=True)
        (d / "calibrated.json").write_text(fitted.dumps(), encoding="utf-8")
        (d / "compare.csv").write_text(report.to_csv(table.columns, table.rows), encoding="utf-8")
        (d / "checks.csv").write_text(
            report.to_csv(("check", "value", "expected", "result"), check_rows), encoding="utf-8")
        for n, reps in sweeps.items():
            (d / f"sweep_{n}.csv").write_text(report.to_csv(REPORT_COLUMNS, [r.row() for r in reps]),
                                              encoding="utf-8")
            if args.svg:
                for tag, svg in _sweep_plots(n, reps).items():
                    (d / f"sweep_{n}_{tag}.svg").write_text(svg, encoding="utf-8")
    return EXIT_OK if n_pass == len(checks) else EXIT_MISMATCH


# -- parser ---------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="scenario JSON (default: $DRAM3D_CONFIG or shipped)")
    common.add_argument("--profile", action="append",
                        help="profile name; repeat for several (default: all)")
    common.add_argument("--scheme", choices=[s.value for s in Scheme])
    common.add_argument("--layers", type=int)
    common.add_argument("--out", help="output path")
    common.add_argument("--csv", action="store_true", help="CSV instead of JSON/text")
    common.add_argument("--svg", action="store_true", help="also write SVG plots")
    common.add_argument("--min-pitch", type=float, help="minimum HCB pitch in um")

    p = argparse.ArgumentParser(prog="dram3d", description="3D DRAM design-space exploration")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("evaluate", parents=[common], help="full report for one configuration") \
        .set_defaults(func=cmd_evaluate)
    sw = sub.add_parser("sweep", parents=[common], help="reports over a layer range")
    sw.add_argument("--from", dest="start", type=int, default=10)
    sw.add_argument("--to", dest="stop", type=int, default=200)
    sw.add_argument("--step", type=int, default=10)
    sw.set_defaults(func=cmd_sweep)
    sub.add_parser("compare", parents=[common], help="side-by-side profile comparison") \
        .set_defaults(func=cmd_compare)
    cal = sub.add_parser("calibrate", parents=[common], help="fit free parameters to anchors")
    cal.add_argument("--max-sweeps", type=int)
    cal.set_defaults(func=cmd_calibrate)
    sub.add_parser("feasibility", parents=[common], help="bond-pitch verdict per scheme") \
        .set_defaults(func=cmd_feasibility)
    sub.add_parser("reproduce-paper", parents=[common],
                   help="calibrate, compare, sweep and run the golden checks") \
        .set_defaults(func=cmd_reproduce)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InputError, CalibrationError, ValueError, KeyError, OSError,
            json.JSONDecodeError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        sys.stderr.write(f"dram3d: error: {msg}\n")
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
