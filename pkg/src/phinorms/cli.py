"""Command-line front end: ``phinorms construct | constants | verify``.

Exit codes: 0 success (all assertions pass), 1 assertion failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import csv
import io as _stdio
import json
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import __version__
from . import io as pio
from .constructions import RecipeError, make_system
from .core import DimensionMismatch, FiniteNormedSpace, GramViolation, LinearMap, identity_map
from .optim import OptBudget
from .stochastic import RngPolicy
from .typecotype import c2n, cotype_const, modified_type_const, t2n, type_const
from .verification import SUITES, VerifyConfig, run_suite

CSV_COLUMNS = ("system", "operator", "constant", "value", "direction", "seed")
CONSTANTS = ("cPhi", "tPhi", "tHatPhi", "c2n", "t2n")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


_SPACES = {"linf": np.inf, "inf": np.inf, "l1": 1.0, "1": 1.0, "l2": 2.0, "2": 2.0}


def _exponent(tok: str) -> float:
    if tok in _SPACES:
        return _SPACES[tok]
    try:
        p = float(tok[1:] if tok.startswith("l") else tok)
    except ValueError:
        raise UsageError(f"unknown space exponent {tok!r}") from None
    if p < 1:
        raise UsageError(f"exponent must be >= 1, got {tok!r}")
    return p


def _dim(tok: str) -> int:
    try:
        d = int(tok)
    except ValueError:
        raise UsageError(f"dimension must be an integer, got {tok!r}") from None
    if d < 1:
        raise UsageError(f"dimension must be positive, got {d}")
    return d


def parse_operator(text: str) -> LinearMap:
    """``id:X:d``, ``iota:p:q:d``, ``rand:X:d:seed`` or a path to a map JSON file.

    ``rand`` draws a gaussian d x d matrix scaled by 1/sqrt(d), acting X -> X.
    """
    parts = text.split(":")
    head = parts[0]
    if head == "id" and len(parts) == 3:
        return identity_map(_dim(parts[2]), _exponent(parts[1]))
    if head == "iota" and len(parts) == 4:
        return identity_map(_dim(parts[3]), _exponent(parts[1]), _exponent(parts[2]))
    if head == "rand" and len(parts) == 4:
        d, p = _dim(parts[2]), _exponent(parts[1])
        try:
            seed = int(parts[3])
        except ValueError:
            raise UsageError(f"seed must be an integer, got {parts[3]!r}") from None
        rng = np.random.default_rng(np.random.SeedSequence([seed, 77]))
        X = FiniteNormedSpace.lp(d, p)
        return LinearMap(X, X, rng.standard_normal((d, d)) / np.sqrt(d))
    path = Path(text)
    if path.is_file():
        try:
            return pio.map_from_dict(pio.load_json(path))
        except (KeyError, ValueError, TypeError) as exc:
            raise UsageError(f"cannot read operator file {text}: {exc}") from None
    raise UsageError(f"unrecognised operator {text!r}")


def _load_system(path: str):
    try:
        return pio.system_from_dict(pio.load_json(path))
    except FileNotFoundError:
        raise UsageError(f"system file not found: {path}") from None
    except GramViolation as exc:
        raise UsageError(f"system file {path} is not orthonormal: {exc}") from None
    except (KeyError, ValueError, TypeError) as exc:
        raise UsageError(f"cannot read system file {path}: {exc}") from None


def _load_recipe(text: str) -> dict:
    p = Path(text)
    src = p.read_text() if p.is_file() else text
    try:
        return json.loads(src)
    except json.JSONDecodeError as exc:
        raise UsageError(f"recipe is neither a JSON file nor JSON text: {exc}") from None


def _positive(name: str):
    def conv(s):
        try:
            v = int(s)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{name} must be an integer") from None
        if v < 1:
            raise argparse.ArgumentTypeError(f"{name} must be positive")
        return v
    return conv


def _positive_float(s):
    try:
        v = float(s)
    except ValueError:
        raise argparse.ArgumentTypeError("tolerance must be a number") from None
    if not v > 0:
        raise argparse.ArgumentTypeError("tolerance must be positive")
    return v


def _config_dict(args) -> dict:
    keys = ("command", "seed", "restarts", "iterations", "samples", "tol", "format", "out",
            "recipe", "system", "operator", "which", "suite")
    return {k: getattr(args, k) for k in keys if getattr(args, k, None) is not None}


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _csv_text(rows: List[dict], columns) -> str:
    buf = _stdio.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow(r)
    return buf.getvalue()


def cmd_construct(args) -> int:
    recipe = _load_recipe(args.recipe)
    try:
        phi = make_system(recipe)
    except RecipeError as exc:
        raise UsageError(str(exc)) from None
    payload = pio.system_to_dict(phi)
    _emit(pio.dumps(payload) + "\n", args.out)
    msg = f"gram deviation: {phi.gram_deviation():.3e}\n"
    (sys.stderr if args.out is None else sys.stdout).write(msg)
    return EXIT_OK


def _budget(args) -> OptBudget:
    kw = {"restarts": args.restarts, "policy": RngPolicy(args.seed, args.samples)}
    if args.iterations is not None:
        kw["max_iterations"] = args.iterations
    if args.tol is not None:
        kw["convergence_tol"] = args.tol
    return OptBudget(**kw)


def cmd_constants(args) -> int:
    phi = _load_system(args.system)
    T = parse_operator(args.operator)
    budget = _budget(args)
    n = phi.n
    try:
        if args.which == "cPhi":
            rep = cotype_const(phi, T, budget)
        elif args.which == "tPhi":
            rep = type_const(phi, T, budget)
        elif args.which == "tHatPhi":
            rep = modified_type_const(phi, T, budget)
        elif args.which == "c2n":
            rep = c2n(T, n, budget)
        else:
            rep = t2n(T, n, budget)
    except DimensionMismatch as exc:
        raise UsageError(f"dimension mismatch: {exc}") from None
    system_name = phi.label or Path(args.system).stem
    if args.format == "csv":
        row = {"system": system_name, "operator": args.operator, "constant": args.which,
               "value": repr(float(rep.value)), "direction": rep.direction, "seed": args.seed}
        _emit(_csv_text([row], CSV_COLUMNS), args.out)
    else:
        payload = {"version": __version__, "config": _config_dict(args), "seed": args.seed,
                   "system": system_name, "operator": args.operator, "constant": args.which,
                   "report": rep.to_dict()}
        _emit(pio.dumps(payload) + "\n", args.out)
    return EXIT_OK


VERIFY_COLUMNS = ("suite", "check", "assertion", "passed", "measured", "seed")


def cmd_verify(args) -> int:
    cfg = VerifyConfig(seed=args.seed, restarts=args.restarts, samples=args.samples, tol=args.tol,
                       iterations=args.iterations)
    report = run_suite(args.suite, cfg)
    for r in report.results:
        print(r.line(), file=sys.stderr if args.out is None else sys.stdout)
    if args.format == "csv":
        rows = [{"suite": args.suite, "check": r.key, "assertion": a.name, "passed": a.passed,
                 "measured": json.dumps(pio.to_jsonable(a.measured), sort_keys=True), "seed": args.seed}
                for r in report.results for a in r.assertions]
        _emit(_csv_text(rows, VERIFY_COLUMNS), args.out)
    else:
        payload = {"version": __version__, "config": _config_dict(args), "seed": args.seed,
                   **report.to_dict()}
        _emit(pio.dumps(payload) + "\n", args.out)
    return EXIT_OK if report.passed else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    common.add_argument("--restarts", type=_positive("restarts"), default=None,
                        help="optimizer restarts (default: per command)")
    common.add_argument("--iterations", type=_positive("iterations"), default=None,
                        help="iterations per restart")
    common.add_argument("--samples", type=_positive("samples"), default=200_000,
                        help="Monte-Carlo samples for witness re-evaluation")
    common.add_argument("--tol", type=_positive_float, default=None, help="tolerance override")
    common.add_argument("--out", default=None, help="output file (default: stdout)")
    common.add_argument("--format", choices=("json", "csv"), default="json")

    parser = argparse.ArgumentParser(prog="phinorms", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("construct", parents=[common], help="build a system file from a recipe")
    p.add_argument("recipe", help="recipe JSON text or file, e.g. '{\"kind\":\"fourier\",\"n\":4,\"N\":16}'")
    p.set_defaults(func=cmd_construct)

    p = sub.add_parser("constants", parents=[common], help="estimate a type/cotype constant")
    p.add_argument("system", help="system JSON file")
    p.add_argument("operator", help="id:X:d, iota:p:q:d, rand:X:d:seed or a map JSON file")
    p.add_argument("which", choices=CONSTANTS)
    p.set_defaults(func=cmd_constants)

    p = sub.add_parser("verify", parents=[common], help="run a verification suite")
    p.add_argument("suite", choices=sorted(SUITES))
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    if args.command == "constants" and args.restarts is None:
        args.restarts = OptBudget().restarts
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"phinorms: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
