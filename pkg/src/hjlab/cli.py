"""Command line entry point: ``hjlab <experiment> --config <path> [--out <dir>]``.

Exit codes: 0 on pass, 1 on monitor failure, 2 on configuration error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import EXPERIMENTS, ConfigError, parse_config
from .experiments import run_experiment


def build_parser():
    parser = argparse.ArgumentParser(
        prog="hjlab",
        description="Numerical experiments on u_t = Laplace(u) + |grad u|^p")
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", required=True, help="path to the config file")
        p.add_argument("--out", default="runs",
                       help="directory receiving the timestamped run folder")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        text = Path(args.config).read_text(encoding="utf-8")
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 2
    try:
        cfg = parse_config(text, args.experiment)
        code, run_dir, manifest = run_experiment(args.experiment, cfg, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    print(f"run directory: {run_dir}")
    failures = [m["name"] for m in manifest["monitors"] if not m["passed"]]
    if failures:
        print("failed monitors: " + ", ".join(failures))
    return code


if __name__ == "__main__":
    sys.exit(main())
