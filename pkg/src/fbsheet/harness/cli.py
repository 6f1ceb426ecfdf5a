"""Command-line entry point: ``fbsheet <subcommand> [options]``.

Exit status is 0 on success, 1 when an asserted check fails, 2 on usage or
configuration errors and 3 on numerical failures.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from ..analytic import exact_moment
from ..errors import ConfigError, DomainError, FBSheetError, NumericalError
from ..exponents import beta_and_dim, construct_weights, delta_threshold
from ..field_model import Box, validate_hurst
from ..gaussian_engine import Grid, sample_field
from ..local_time import LatticeSpec, occupation_histogram
from ..rng import SeedSpec
from .config import load_config
from .fitting import fit_exponent
from .runner import OUT_DIR_ENV, run
from .schemas import SCHEMA_VERSION, validate
from .suites import SUITES, run_suite


def _floats(text: str) -> tuple:
    try:
        return tuple(float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _u64(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return v


def _common(p: argparse.ArgumentParser, config_required: bool = False) -> None:
    p.add_argument("--config", metavar="PATH", required=config_required, help="experiment configuration file")
    p.add_argument("--seed", type=_u64, default=0, metavar="U64", help="master seed")
    p.add_argument("--out", metavar="DIR", help=f"output directory (default: ${OUT_DIR_ENV})")
    p.add_argument("--replicas", type=_positive_int, metavar="N", help="number of replicas")
    p.add_argument("--json", action="store_true", help="print the JSON document on stdout")


def _field_args(p: argparse.ArgumentParser, box: bool = True) -> None:
    p.add_argument("--H", type=_floats, required=True, help="Hurst indices, e.g. 0.4,0.6")
    p.add_argument("--d", type=int, default=1, help="spatial dimension")
    if box:
        p.add_argument("--lower", type=_floats, help="lower corner of the time box (default 1,...,1)")
        p.add_argument("--upper", type=_floats, help="upper corner of the time box (default 2,...,2)")
        p.add_argument("--cells", type=_positive_int, default=64, help="grid cells per axis")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fbsheet", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, metavar="subcommand")

    p = sub.add_parser("simulate", help="sample a field on a grid and write it as CSV")
    _common(p)
    _field_args(p)

    p = sub.add_parser("localtime", help="histogram local time of one sample (CSV + JSON sidecar)")
    _common(p)
    _field_args(p)
    p.add_argument("--bin-width", type=float, help="bin side (default: 4 dt^min(H))")

    p = sub.add_parser("exponents", help="regime, exponents and Hoelder weights")
    _common(p)
    _field_args(p, box=False)
    p.add_argument("--delta", type=float, help="delta for the weights (default: half the threshold)")

    p = sub.add_parser("verify", help="run the identity / inequality / exponent suites")
    _common(p)
    p.add_argument("--suite", choices=SUITES + ("all",), default="all")
    p.add_argument("--scale", type=float, default=1.0, help="fraction of the default configuration counts")

    p = sub.add_parser("moments", help="exact and simulated local-time moments")
    _common(p)
    _field_args(p)
    p.add_argument("--n", type=int, default=1, help="moment order (1-3)")
    p.add_argument("--x", type=_floats, default=(0.0,), help="spatial point")
    p.add_argument("--bin-width", type=float, help="bin side for the simulated estimate")

    p = sub.add_parser("fit", help="log-log regression of (r, value) pairs from a CSV file")
    _common(p)
    p.add_argument("--input", required=True, metavar="CSV", help="file with columns r,value[,weight]")

    p = sub.add_parser("run", help="run the scenarios of a configuration file")
    _common(p, config_required=True)
    p.add_argument("--workers", type=_positive_int, help="worker processes")
    return parser


def _out_dir(args) -> Path | None:
    target = args.out or os.environ.get(OUT_DIR_ENV)
    if target:
        Path(target).mkdir(parents=True, exist_ok=True)
        return Path(target)
    return None


def _emit(args, doc: dict, kind: str) -> None:
    doc = {"schema_version": SCHEMA_VERSION, **doc}
    validate(doc, kind)
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    out = _out_dir(args)
    if out is not None:
        (out / f"{args.command}.json").write_text(text)
    if args.json or out is None:
        sys.stdout.write(text)


def _box(args, n: int) -> Box:
    lower = args.lower or (1.0,) * n
    upper = args.upper or (2.0,) * n
    if len(lower) != n or len(upper) != n:
        raise DomainError("box corners need one coordinate per Hurst index")
    return Box(lower, upper)


def _sample(args):
    hv = validate_hurst(args.H, args.d)
    T = _box(args, hv.n_axes)
    grid = Grid.uniform(T.lower, T.upper, args.cells)
    return hv, T, grid, sample_field(grid, hv, args.d, SeedSpec(args.seed))


def _bin_width(args, T: Box, H) -> float:
    if args.bin_width is not None:
        if args.bin_width <= 0:
            raise DomainError("bin width must be positive")
        return args.bin_width
    dt = max((b - a) / args.cells for a, b in zip(T.lower, T.upper))
    return 4 * dt ** min(H)


def cmd_simulate(args) -> int:
    hv, T, grid, sample = _sample(args)
    out = _out_dir(args)
    header = [f"t_{l + 1}" for l in range(hv.n_axes)] + [f"B_{k + 1}" for k in range(args.d)]
    pts = grid.points()
    vals = sample.values.reshape(-1, args.d)
    doc = {"kind": "field", "H": list(hv.h), "d": args.d, "shape": list(grid.shape),
           "seed": {"master_seed": args.seed, "stream_id": 0}}
    if out is not None:
        with open(out / "field.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for p, v in zip(pts, vals):
                w.writerow([f"{x:.17g}" for x in (*p, *v)])
    _emit(args, doc, "field")
    return 0


def cmd_localtime(args) -> int:
    hv, T, grid, sample = _sample(args)
    w = _bin_width(args, T, hv.h)
    ltf = occupation_histogram(sample, T, LatticeSpec(w, origin=-w / 2))
    out = _out_dir(args)
    if out is not None:
        (out / "localtime.csv").write_text(ltf.to_csv())
    _emit(args, {"kind": "localtime", **ltf.sidecar()}, "localtime")
    return 0


def cmd_exponents(args) -> int:
    hv = validate_hurst(args.H, args.d)
    prof = beta_and_dim(hv, args.d)
    d_tau = delta_threshold(hv.h, float(args.d))
    delta = args.delta if args.delta is not None else d_tau / 2
    w = construct_weights(hv.h, float(args.d), delta)
    weights = {"p": list(w.p), "delta": w.delta, "ell0": w.ell0, "rho": w.rho,
               "eta": w.eta if math.isfinite(w.eta) else "nan", "delta_tau": w.delta_tau}
    _emit(args, {"kind": "exponents", "H": list(hv.h), "d": args.d, **prof.to_json(), "weights": weights},
          "exponents")
    return 0


def cmd_verify(args) -> int:
    names = SUITES if args.suite == "all" else (args.suite,)
    results = [run_suite(n, args.seed, args.scale) for n in names]
    ok = all(not r.failures for r in results)
    _emit(args, {"kind": "verify", "seed": args.seed, "suites": [r.to_json() for r in results], "ok": ok},
          "suite-report")
    return 0 if ok else 1


def cmd_moments(args) -> int:
    hv = validate_hurst(args.H, args.d)
    T = _box(args, hv.n_axes)
    rep = exact_moment(args.x, T, hv.h, args.d, args.n, seed=SeedSpec(args.seed))
    simulated = None
    if args.replicas:
        x = np.broadcast_to(np.asarray(args.x, dtype=float), (args.d,))
        grid = Grid.uniform(T.lower, T.upper, args.cells)
        w = _bin_width(args, T, hv.h)
        from .runner import _factors

        grid, factors = _factors(tuple(tuple(a) for a in grid.per_axis), tuple(hv.h))
        vals = []
        for i in range(args.replicas):
            s = sample_field(grid, hv, args.d, SeedSpec(args.seed, i), factors=factors)
            ltf = occupation_histogram(s, T, LatticeSpec(w, origin=tuple(x - w / 2)))
            vals.append(ltf.value_at(x) ** args.n)
        vals = np.asarray(vals)
        se = float(vals.std(ddof=1) / math.sqrt(vals.size)) if vals.size > 1 else float("nan")
        simulated = {"replicas": args.replicas, "mean": float(vals.mean()), "standard_error": se, "bin_width": w}
    _emit(args, {"kind": "moments", "exact": rep.to_json(), "simulated": simulated}, "moments")
    return 0


def cmd_fit(args) -> int:
    try:
        with open(args.input, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise ConfigError("--input", f"cannot read {args.input}: {exc.strerror}") from None
    if not rows or not {"r", "value"} <= set(rows[0]):
        raise ConfigError("--input", "CSV needs columns r and value")
    pairs = [(float(r["r"]), float(r["value"])) for r in rows]
    weights = [float(r["weight"]) for r in rows] if "weight" in rows[0] else None
    fit = fit_exponent(pairs, weights)
    _emit(args, {"kind": "fit", **fit.to_json(), "n": len(pairs)}, "fit")
    return 0


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    overrides = {}
    if args.replicas:
        overrides["replicas"] = args.replicas
    if args.seed:
        overrides["master_seed"] = args.seed
    if args.workers:
        overrides["workers"] = args.workers
    cfg = replace(cfg, **overrides)
    report = run(cfg, args.out)
    doc = report.to_json()
    validate(doc, "run-report")
    if args.json:
        sys.stdout.write(report.dumps())
    else:
        s = doc["summary"]
        print(f"{s['asserted']} asserted checks, {s['failed']} failed")
        for c in report.failed:
            print(f"FAIL {c.check_id}: lhs={c.lhs:.6g} rhs={c.rhs:.6g} slack={c.slack:.3g}")
    return 0 if report.ok else 1


COMMANDS = {
    "simulate": cmd_simulate,
    "localtime": cmd_localtime,
    "exponents": cmd_exponents,
    "verify": cmd_verify,
    "moments": cmd_moments,
    "fit": cmd_fit,
    "run": cmd_run,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except FBSheetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
