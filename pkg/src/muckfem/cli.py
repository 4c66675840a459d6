"""Command line entry point: ``muckfem run <config>`` and ``muckfem list-experiments``."""
from __future__ import annotations

import argparse
import sys

from . import config as config_mod
from .errors import ConfigError, MuckfemError
from .experiments import list_experiments, run_experiment
from .report import emit_report

EXIT_OK = 0
EXIT_MODULE = 2
EXIT_CONFIG = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="muckfem", description="Weighted finite element studies.")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run one experiment config")
    run.add_argument("config")
    run.add_argument("--out", default=None, help="output directory (overrides [output] dir)")
    run.add_argument("--levels", type=int, default=None, help="number of refinement levels")
    run.add_argument("--format", default=None, help="comma separated subset of csv,summary,plot")
    run.add_argument("--fit-all", action="store_true", help="include the coarsest level in rate fits")
    sub.add_parser("list-experiments", help="list experiment kinds")
    return parser


def _run(args) -> int:
    try:
        cfg = config_mod.load(args.config)
        if args.levels is not None:
            cfg = cfg.with_levels(args.levels)
        if args.fit_all:
            cfg.values["experiment"]["fit_all"] = True
        if args.format is not None:
            cfg.values["output"]["formats"] = args.format
            cfg.validate()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        rep = run_experiment(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MuckfemError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MODULE
    out = args.out or cfg.get("output", "dir")
    for path in emit_report(rep, out, cfg.formats):
        print(path)
    for norm, (slope, r2) in rep.fits.items():
        print(f"{norm}: order {slope:.4f} (R^2 {r2:.4f})")
    print(f"wall time {rep.wall_time:.2f} s", file=sys.stderr)
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "list-experiments":
        for kind, text in list_experiments():
            print(f"{kind:16s} {text}")
        return EXIT_OK
    return _run(args)


if __name__ == "__main__":
    sys.exit(main())
