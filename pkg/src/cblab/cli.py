"""Command line entry point: ``cblab run`` and ``cblab suite``."""

from __future__ import annotations

import argparse
import sys

from .convergence import SUITES, ConfigError, emit, load_config, run_experiment, run_suite
from .energy import QuadratureError
from .potentials import DomainError


def _threads(value):
    n = int(value)
    if n < 1:
        raise argparse.ArgumentTypeError("thread count must be at least 1")
    return n


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cblab", description="Cauchy-Born convergence experiments on 2-lattices")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one convergence sweep from a config file")
    run.add_argument("--config", required=True, help="key = value experiment file")
    run.add_argument("--out", help="output file (default: stdout)")
    run.add_argument("--format", choices=("csv", "json"), default="csv")
    run.add_argument("--threads", type=_threads, default=1)

    suite = sub.add_parser("suite", help="run a bundled acceptance suite")
    suite.add_argument("name", choices=SUITES)
    suite.add_argument("--out", help="directory for per-sweep CSV files")
    suite.add_argument("--threads", type=_threads, default=1)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "suite":
        return run_suite(args.name, args.out, args.threads)

    try:
        cfg = load_config(args.config)
        report = run_experiment(cfg, args.threads)
    except (ConfigError, DomainError, QuadratureError, OSError, ValueError) as exc:
        print(f"cblab: error: {exc}", file=sys.stderr)
        return 1
    text = emit(report, args.format, args.out)
    if args.out is None:
        sys.stdout.write(text)
    slope = "exact" if report.slope is None else f"{report.slope:.4f} (rms {report.residual:.2e}, {report.fit_count} points)"
    print(f"slope: {slope}; wall time {report.wall_time:.2f}s", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
