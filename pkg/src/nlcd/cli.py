"""Command line entry point: ``nlcd run|verify|profile``."""
from __future__ import annotations

import argparse
import dataclasses
import sys

import numpy as np

from .experiment import SpecError, execute, load_spec
from .grid import Grid
from .profiles import make_profile


def _report(man) -> int:
    for c in man.criteria:
        val = "" if c.value is None else f" ({c.value:.6g})"
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name}{val}")
    for note in man.notes:
        print(f"note: {note}")
    print(f"manifest: {man.output_dir}/manifest.json")
    return 0 if man.passed else 1


def _load(path):
    try:
        return load_spec(path)
    except SpecError as e:
        print(f"error: {e}", file=sys.stderr)
        return None


def cmd_run(args) -> int:
    spec = _load(args.spec)
    if spec is None:
        return 2
    if args.output_dir:
        spec = dataclasses.replace(spec, output_dir=args.output_dir)
    return _report(execute(spec))


def cmd_verify(args) -> int:
    spec = _load(args.spec)
    if spec is None:
        return 2
    if args.output_dir:
        spec = dataclasses.replace(spec, output_dir=args.output_dir)
    return _report(execute(spec, studies="inequalities"))


def cmd_profile(args) -> int:
    if args.t <= 0:
        print("error: --t must be positive", file=sys.stderr)
        return 2
    hw = args.half_width or 8.0 * np.sqrt(args.A * args.t) + abs(args.M)
    grid = Grid.symmetric(hw, args.n)
    w = make_profile(args.kind, args.M, args.A)
    u = w(args.t, grid.x)
    out = sys.stdout
    out.write("x,u\n")
    for xi, ui in zip(grid.x, u):
        out.write(f"{xi:.17g},{ui:.17g}\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nlcd", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run the study described by a TOML file")
    r.add_argument("spec")
    r.add_argument("--output-dir")
    r.set_defaults(func=cmd_run)
    v = sub.add_parser("verify", help="run only the inequality audits")
    v.add_argument("spec")
    v.add_argument("--output-dir")
    v.set_defaults(func=cmd_verify)
    p = sub.add_parser("profile", help="print a limit profile as x,u CSV")
    p.add_argument("--kind", choices=("heat", "burgers"), required=True)
    p.add_argument("--M", type=float, required=True)
    p.add_argument("--A", type=float, required=True)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--n", type=int, default=801)
    p.add_argument("--half-width", type=float, default=None)
    p.set_defaults(func=cmd_profile)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
