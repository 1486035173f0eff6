"""
nicurv CLI: numerical laboratory for negative isotropic curvature.

Usage:
  nicurv COMMAND [--config FILE] [--output PATH] [--format csv|json] ...

Examples:
  nicurv curvature-report --config sphere.json    # s, |W|, sigma, eig Q
  nicurv isotropic-check --jobs 4                 # NIC verdict per point
  nicurv glue-sweep --c-max 1024 --output f.csv   # F(g_c) and c*
  nicurv conformal-solve --c 16                   # lambda and sigma~ at c
  nicurv verify NC101 eigen-chain                 # selected suites
  nicurv pipeline -v                              # sweep -> c* -> solve
"""
from __future__ import annotations

import argparse
import logging
import sys
from typing import Any, Optional, Sequence

from nicurv import __version__
from nicurv.config import COMMANDS, ConfigError, load_config
from nicurv.engine import EXIT_CONFIG, run
from nicurv.reporter import Reporter

logger = logging.getLogger(__name__)

_HELP = {
    "curvature-report": "s, |W|, sigma and eigenvalues of Q per point",
    "isotropic-check": "extremal isotropic curvatures and NIC verdicts",
    "glue-sweep": "the functional F over a geometric grid of c",
    "conformal-solve": "lowest eigenpair of L_mu and sigma~ at glue.c",
    "verify": "run the NC verify suites",
    "pipeline": "sweep F, pick c*, solve at 2 c*, certify sigma~ < 0",
}

# flag dest -> (section, key); section None means top level
_OVERRIDES: dict[str, tuple[Optional[str], str]] = {
    "seed": (None, "seed"),
    "mu": (None, "mu"),
    "jobs": (None, "jobs"),
    "output": ("output", "path"),
    "format": ("output", "format"),
    "builtin": ("metric", "builtin"),
    "kind": ("metric", "kind"),
    "counts": ("grid", "counts"),
    "stencil_order": ("grid", "stencil_order"),
    "c": ("glue", "c"),
    "c_min": ("glue", "c_min"),
    "c_max": ("glue", "c_max"),
    "c_steps": ("glue", "c_steps"),
    "vol0": ("glue", "vol0"),
    "area": ("glue", "area"),
    "ell": ("glue", "ell"),
    "s_cap": ("glue", "s_cap"),
    "w_cap": ("glue", "w_cap"),
    "cap_volume": ("glue", "cap_volume"),
    "variant": ("glue", "variant"),
    "cells": ("solver", "cells"),
    "samples": ("search", "samples"),
    "refinements": ("search", "refinements"),
}


def _common_options() -> argparse.ArgumentParser:
    """Options shared by every subcommand."""
    p = argparse.ArgumentParser(add_help=False)

    run = p.add_argument_group("run")
    run.add_argument("--config", metavar="FILE",
                     help="JSON run configuration (defaults are built in)")
    run.add_argument("--output", metavar="PATH",
                     help="write the artifact here instead of stdout")
    run.add_argument("--format", choices=("csv", "json"),
                     help="artifact format (default: csv)")
    run.add_argument("--seed", type=int, help="master seed (default: 0)")
    run.add_argument("--mu", type=float,
                     help="weight of s in sigma_mu (default: 1/6)")
    run.add_argument("--jobs", type=int,
                     help="worker threads for sweeps and point checks")
    run.add_argument("--flip-sign", action="store_true", default=None,
                     help="negate every Riemann tensor (negative control)")

    metric = p.add_argument_group("metric")
    metric.add_argument("--builtin", help="named metric, e.g. sphere")
    metric.add_argument("--kind", choices=("analytic", "warped", "sampled"))
    metric.add_argument("--counts", type=int, nargs="+", metavar="N",
                        help="report points per axis")
    metric.add_argument("--stencil-order", type=int, choices=(2, 4))

    glue = p.add_argument_group("glue")
    glue.add_argument("--c", type=float, help="c for conformal-solve")
    glue.add_argument("--c-min", type=float)
    glue.add_argument("--c-max", type=float)
    glue.add_argument("--c-steps", type=int)
    glue.add_argument("--vol0", type=float, help="Vol of the thick part")
    glue.add_argument("--area", type=float, help="area of the cusp torus")
    glue.add_argument("--ell", type=float, help="length of the S^1 factor")
    glue.add_argument("--s-cap", type=float, help="int s dV over the cap")
    glue.add_argument("--w-cap", type=float, help="int |W| dV over the cap")
    glue.add_argument("--cap-volume", type=float)
    glue.add_argument("--variant", choices=("log", "half"))

    solve = p.add_argument_group("solver")
    solve.add_argument("--cells", type=int, help="profile cells (>= 64)")
    solve.add_argument("--samples", type=int,
                       help="random isotropic frames per point")
    solve.add_argument("--refinements", type=int,
                       help="coordinate-ascent sweeps per start")

    out = p.add_argument_group("output")
    out.add_argument("-v", "--verbose", action="count", default=0,
                     help="-v for INFO logs, -vv for DEBUG")
    out.add_argument("-q", "--quiet", action="store_true",
                     help="suppress the human-readable summary")
    out.add_argument("--no-color", action="store_true",
                     help="plain summary even on a terminal")
    out.add_argument("--debug", action="store_true",
                     help="show full tracebacks on unexpected errors")
    return p


def _build_parser() -> argparse.ArgumentParser:
    """Construct the argument parser with one subparser per command."""
    parser = argparse.ArgumentParser(
        prog="nicurv",
        description="Numerical laboratory for negative isotropic curvature",
        epilog=(
            "Exit codes:\n"
            "  0 = success\n"
            "  1 = configuration error, or a failed verify suite\n"
            "  2 = isotropic-check: not NIC somewhere;"
            " pipeline: F never negative\n"
            "  3 = eigensolver failure\n"
            "  4 = sigma~ >= 0 at some node\n"
            "130 = interrupted"
        ),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version",
                        version=f"nicurv {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND",
                                required=True)
    common = _common_options()
    for command in COMMANDS:
        p = sub.add_parser(command, parents=[common], help=_HELP[command],
                           description=_HELP[command])
        if command == "verify":
            p.add_argument("suites", nargs="*", metavar="SUITE",
                           help="suite codes or names (default: all)")
    return parser


def overrides_from_args(args: argparse.Namespace) -> dict[str, Any]:
    """Build nested config overrides from every flag the user set."""
    overrides: dict[str, Any] = {"command": args.command}
    for dest, (section, key) in _OVERRIDES.items():
        value = getattr(args, dest, None)
        if value is None:
            continue
        if section is None:
            overrides[key] = value
        else:
            overrides.setdefault(section, {})[key] = value
    if args.flip_sign:
        overrides["flip_sign"] = True
    if getattr(args, "suites", None):
        overrides["suites"] = list(args.suites)
    return overrides


def _configure_logging(verbose: int) -> None:
    level = (logging.WARNING, logging.INFO, logging.DEBUG)[min(verbose, 2)]
    logging.basicConfig(
        level=level,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )


def main(argv: Optional[Sequence[str]] = None) -> None:
    """CLI entry point: parses flags, loads config, delegates to engine."""
    parser = _build_parser()
    args = parser.parse_args(argv)
    _configure_logging(args.verbose)

    try:
        cfg = load_config(args.config, overrides_from_args(args))
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        sys.exit(EXIT_CONFIG)

    reporter = Reporter(color=False if args.no_color else None,
                        quiet=args.quiet)
    try:
        sys.exit(run(cfg, reporter))
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        sys.exit(EXIT_CONFIG)
    except KeyboardInterrupt:
        print("\nerror: Interrupted by user", file=sys.stderr)
        sys.exit(130)  # 128 + SIGINT
    except Exception as e:
        if args.debug:
            raise
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        print("Run with --debug for full traceback", file=sys.stderr)
        sys.exit(EXIT_CONFIG)
