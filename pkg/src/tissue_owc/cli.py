"""Command-line interface.

Exit codes: 0 success, 1 runtime or numerical failure, 2 usage or
validation error.
"""
from __future__ import annotations

import argparse
import json
import math
import sys

from . import __version__
from .channel import (
    LinkGeometry,
    depth_for_mu_a,
    optimal_wavelength,
    parse_distance,
    pathloss_spectrum,
    transmission_windows,
)
from .fitting import DatasetFormatError, FitConditioningError, ModelSpec, fit, read_dataset_csv, result_to_record
from .spectra import (
    CONSTITUENTS,
    DomainError,
    EvaluationError,
    UnknownConstituentError,
    constituent_spectrum,
    evaluate,
    get_model,
    load_model,
    wavelength_grid,
)
from .tissue import PRESETS, CompositionError, parse_composition, tissue_mu_a, tissue_spectrum

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


# ---------------------------------------------------------------- helpers

def parse_band(text: str):
    """``lo:hi[:step]`` in nm; step defaults to 1."""
    parts = text.split(":")
    if len(parts) not in (2, 3):
        raise UsageError(f"band {text!r} must look like lo:hi or lo:hi:step")
    try:
        lo, hi = float(parts[0]), float(parts[1])
        step = float(parts[2]) if len(parts) == 3 else 1.0
    except ValueError:
        raise UsageError(f"band {text!r} has a non-numeric field") from None
    wavelength_grid(lo, hi, step)  # validates
    return (lo, hi), step


def _fmt(value, precision):
    if isinstance(value, float) and math.isinf(value):
        return "unbounded" if value > 0 else "-inf"
    return f"{value:.{precision}g}"


def _round(value, precision):
    if isinstance(value, float) and math.isfinite(value):
        return float(f"{value:.{precision}g}")
    return value


def _csv(header, rows, precision):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(v if isinstance(v, str) else _fmt(v, precision) for v in row))
    return "\n".join(lines) + "\n"


def _json(doc):
    return json.dumps(doc, indent=2) + "\n"


def _composition(args):
    given = [x for x in (args.preset, args.set, args.composition) if x is not None]
    if len(given) != 1:
        raise UsageError("give exactly one of --preset, --set or --composition")
    if args.preset is not None:
        if args.preset not in PRESETS:
            raise UsageError(f"unknown preset {args.preset!r}; valid presets: {', '.join(PRESETS)}")
        return PRESETS[args.preset].composition
    if args.set is not None:
        return parse_composition(args.set)
    with open(args.composition, encoding="utf-8") as fh:
        return parse_composition(fh.read())


def _distance(text):
    try:
        return parse_distance(text)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


# ---------------------------------------------------------------- commands

def cmd_constituent(args):
    if args.model_file:
        model = load_model(args.model_file)
    elif args.name:
        model = get_model(args.name)
    else:
        raise UsageError(f"give a constituent name ({', '.join(CONSTITUENTS)}) or --model-file")
    band, step = parse_band(args.band)
    if args.no_clamp:
        grid = wavelength_grid(band[0], band[1], step)
        values = evaluate(model, grid, extrapolate=args.extrapolate, clamp=False)
        rows = zip(grid.tolist(), values.tolist())
    else:
        rows = iter(constituent_spectrum(model, band, step, extrapolate=args.extrapolate))
    rows = list(rows)
    if args.format == "json":
        return _json({
            "constituent": model.constituent or model.kind,
            "samples": [{"wavelength_nm": _round(l, args.precision), "mu_a_cm1": _round(v, args.precision)}
                        for l, v in rows],
        })
    return _csv(("wavelength_nm", "mu_a_cm1"), rows, args.precision)


def cmd_tissue(args):
    comp = _composition(args)
    band, step = parse_band(args.band)
    rows = list(tissue_spectrum(comp, band, step))
    if args.format == "json":
        return _json({
            "tissue": comp.name or "custom",
            "composition": comp.as_dict(),
            "samples": [{"wavelength_nm": _round(l, args.precision), "mu_a_cm1": _round(v, args.precision)}
                        for l, v in rows],
        })
    return _csv(("wavelength_nm", "mu_a_cm1"), rows, args.precision)


def cmd_pathloss(args):
    comp = _composition(args)
    geom = _distance(args.delta)
    band, step = parse_band(args.band)
    spec = pathloss_spectrum(comp, geom, band, step)
    if args.db:
        header = ("wavelength_nm", "loss_db")
        rows = [(p.lam, p.loss_db) for p in spec]
    else:
        header = ("wavelength_nm", "mu_a_cm1", "loss_linear", "loss_db")
        rows = [(p.lam, p.mu_a, p.loss_linear, p.loss_db) for p in spec]
    if args.format == "json":
        return _json({
            "tissue": comp.name or "custom",
            "delta_cm": geom.delta_cm,
            "points": [dict(zip(header, (_round(v, args.precision) for v in row))) for row in rows],
            "opaque": [p.lam for p in spec if p.opaque],
        })
    return _csv(header, rows, args.precision)


def cmd_windows(args):
    comp = _composition(args)
    geom = _distance(args.delta)
    band, step = parse_band(args.band)
    if args.threshold < 0:
        raise UsageError("--threshold must be >= 0 dB")
    wins = transmission_windows(comp, geom, band, step, args.threshold)
    rows = [(w.lo, w.hi, w.threshold_db) for w in wins]
    if args.format == "json":
        best = optimal_wavelength(comp, geom, band, step)
        return _json({
            "tissue": comp.name or "custom",
            "delta_cm": geom.delta_cm,
            "threshold_db": args.threshold,
            "windows": [{"lo_nm": _round(w.lo, args.precision), "hi_nm": _round(w.hi, args.precision),
                         "threshold_db": w.threshold_db} for w in wins],
            "optimal_wavelength_nm": best[0],
            "optimal_loss_db": _round(best[1], args.precision),
        })
    return _csv(("lo_nm", "hi_nm", "threshold_db"), rows, args.precision)


def cmd_depth(args):
    if args.mu_a is not None:
        if any(x is not None for x in (args.preset, args.set, args.composition)):
            raise UsageError("--mu-a cannot be combined with a composition")
        if not args.mu_a >= 0:
            raise UsageError("--mu-a must be >= 0")
        mu = args.mu_a
        label = "constant"
    else:
        comp = _composition(args)
        mu = float(tissue_mu_a(comp, args.wavelength))
        label = comp.name or "custom"
    depth = depth_for_mu_a(mu, args.threshold)
    if args.format == "json":
        return _json({
            "tissue": label,
            "wavelength_nm": args.wavelength,
            "mu_a_cm1": _round(mu, args.precision),
            "threshold_db": args.threshold,
            "depth_cm": None if math.isinf(depth) else _round(depth, args.precision),
            "unbounded": math.isinf(depth),
        })
    return _csv(("wavelength_nm", "mu_a_cm1", "threshold_db", "depth_cm"),
                [(args.wavelength, mu, args.threshold, depth)], args.precision)


def _parse_bounds(items):
    bounds = {}
    for item in items or ():
        try:
            name, rng = item.split("=", 1)
            lo, hi = rng.split(":", 1)
            bounds[name.strip()] = (float(lo) if lo.strip() else None, float(hi) if hi.strip() else None)
        except ValueError:
            raise UsageError(f"bound {item!r} must look like name=lo:hi (either side may be empty)") from None
    return bounds


def cmd_fit(args):
    data = read_dataset_csv(args.dataset)
    bounds = _parse_bounds(args.bound)
    if args.model == "gaussian":
        spec = ModelSpec.gaussian_sum(args.terms, bounds=bounds)
    elif args.model == "fourier":
        spec = ModelSpec.fourier(args.order, w=args.w, bounds=bounds)
    else:
        exponent = None if args.fit_exponent else args.exponent
        spec = ModelSpec.power_law(lambda_ref=args.lambda_ref, exponent=exponent, bounds=bounds)
    result = fit(data, spec, restarts=args.restarts, seed=args.seed)
    rec = result_to_record(result)
    if args.format == "csv":
        rows = [(k, v) for k, v in rec["parameters"].items()]
        rows += [(k, v) for k, v in rec["diagnostics"].items()]
        rows += [(k, str(v)) for k, v in rec["fit"].items()]
        out = [("name", "value")]
        for k, v in rows:
            out.append((k, v if isinstance(v, str) else _fmt(float(v), args.precision)))
        return "\n".join(",".join(r) for r in out) + "\n"
    rec["parameters"] = {k: _round(v, args.precision) for k, v in rec["parameters"].items()}
    rec["diagnostics"] = {k: _round(v, args.precision) if isinstance(v, float) else v
                          for k, v in rec["diagnostics"].items()}
    return _json(rec)


def cmd_presets(args):
    rows = []
    for name, p in PRESETS.items():
        c = p.composition
        rows.append((name, c.B, c.S, c.W, c.F, c.M, f'"{p.provenance}"'))
    if args.format == "json":
        return _json({name: {**p.composition.as_dict(), "provenance": p.provenance} for name, p in PRESETS.items()})
    return _csv(("name", "B", "S", "W", "F", "M", "provenance"), rows, args.precision)


# ---------------------------------------------------------------- parser

def _add_output(p, default="csv"):
    p.add_argument("--format", choices=("csv", "json"), default=default)
    p.add_argument("--precision", type=int, default=6, help="significant digits (default 6)")
    p.add_argument("--out", help="write to this file instead of standard output")


def _add_composition(p):
    p.add_argument("--preset", help=f"Table of built-in tissues: {', '.join(PRESETS)}")
    p.add_argument("--set", help="inline composition, e.g. B=0.41%%,S=99.2%%,W=26.1%%,F=22.5%%,M=1.15%%")
    p.add_argument("--composition", help="composition document file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tissue-owc",
        description="Absorption, pathloss and transmission windows of in-body optical links.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("constituent", help="absorption spectrum of one constituent")
    p.add_argument("name", nargs="?", help=", ".join(CONSTITUENTS))
    p.add_argument("--model-file", help="JSON model record (e.g. an exported fit) instead of a name")
    p.add_argument("--band", default="400:1000:1", help="lo:hi[:step] in nm (default 400:1000:1)")
    p.add_argument("--extrapolate", action="store_true", help="allow wavelengths outside the validity domain")
    p.add_argument("--no-clamp", action="store_true", help="emit raw model values, negatives included")
    _add_output(p)
    p.set_defaults(func=cmd_constituent)

    p = sub.add_parser("tissue", help="absorption spectrum of a tissue")
    _add_composition(p)
    p.add_argument("--band", default="400:1000:1")
    _add_output(p)
    p.set_defaults(func=cmd_tissue)

    p = sub.add_parser("pathloss", help="pathloss spectrum through a tissue slab")
    _add_composition(p)
    p.add_argument("--delta", required=True, help="thickness with unit, e.g. 1mm or 0.3cm")
    p.add_argument("--band", default="400:1000:1")
    p.add_argument("--db", action="store_true", help="only emit wavelength_nm,loss_db")
    _add_output(p)
    p.set_defaults(func=cmd_pathloss)

    p = sub.add_parser("windows", help="transmission windows under a pathloss threshold")
    _add_composition(p)
    p.add_argument("--delta", required=True)
    p.add_argument("--threshold", type=float, default=6.0, help="dB (default 6)")
    p.add_argument("--band", default="400:1000:1")
    _add_output(p)
    p.set_defaults(func=cmd_windows)

    p = sub.add_parser("depth", help="penetration depth at one wavelength")
    _add_composition(p)
    p.add_argument("--mu-a", type=float, help="use this absorption coefficient (cm^-1) instead of a tissue")
    p.add_argument("--wavelength", type=float, default=550.0, help="nm (default 550)")
    p.add_argument("--threshold", type=float, default=6.0)
    _add_output(p)
    p.set_defaults(func=cmd_depth)

    p = sub.add_parser("fit", help="fit a model to a wavelength_nm,mu_a_cm1 CSV dataset")
    p.add_argument("dataset")
    p.add_argument("--model", choices=("gaussian", "fourier", "power-law"), required=True)
    p.add_argument("--terms", type=int, default=1, help="Gaussian terms")
    p.add_argument("--order", type=int, default=7, help="Fourier harmonics")
    p.add_argument("--w", type=float, help="fix the Fourier fundamental (rad/nm)")
    p.add_argument("--lambda-ref", type=float, default=550.0)
    p.add_argument("--exponent", type=float, default=-3.0, help="fixed power-law exponent")
    p.add_argument("--fit-exponent", action="store_true")
    p.add_argument("--bound", action="append", help="name=lo:hi, repeatable")
    p.add_argument("--restarts", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    _add_output(p, default="json")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("presets", help="list the built-in tissue compositions")
    _add_output(p)
    p.set_defaults(func=cmd_presets)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        text = args.func(args)
    except (UsageError, UnknownConstituentError, DomainError, CompositionError,
            DatasetFormatError, FileNotFoundError, ValueError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        if isinstance(exc, UnknownConstituentError):
            msg = str(exc)
        print(f"tissue-owc {args.command}: error: {msg}", file=sys.stderr)
        return EXIT_USAGE
    except (FitConditioningError, EvaluationError, ArithmeticError, OSError) as exc:
        print(f"tissue-owc {args.command}: failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
