"""Command line entry point: ``bench run``, ``bench summarize`` and ``bench selfcheck``."""

from __future__ import annotations

import argparse
import sys

from ..planner import ConfigurationError
from .config import load_config
from .runner import emit_csv, run_experiment, summarize
from .selfcheck import run_selfcheck

EXIT_OK, EXIT_FAILED, EXIT_CONFIG = 0, 1, 2


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bench", description="Run and summarize planning benchmarks.")
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run every experiment in a JSON config and write a CSV")
    run.add_argument("--config", required=True, help="JSON experiment config")
    run.add_argument("--out", required=True, help="CSV output path")
    run.add_argument("--jobs", type=int, default=1, help="episodes run in parallel processes")
    run.add_argument("--no-timing", action="store_true", help="write nan instead of wall-clock times")
    summ = sub.add_parser("summarize", help="print mean and stddev per cell of one or more CSVs")
    summ.add_argument("csv", nargs="+")
    sub.add_parser("selfcheck", help="run the built-in oracle checks")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "run":
        try:
            cells = load_config(args.config)
        except ConfigurationError as exc:
            print(f"configuration error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        if args.jobs < 1:
            print("configuration error: --jobs must be at least 1", file=sys.stderr)
            return EXIT_CONFIG
        records = []
        for cfg in cells:
            if args.no_timing:
                cfg.record_timing = False
            records.extend(run_experiment(cfg, jobs=args.jobs))
        try:
            emit_csv(records, args.out)
        except OSError as exc:
            print(f"cannot write {args.out}: {exc}", file=sys.stderr)
            return EXIT_FAILED
        return EXIT_OK
    if args.command == "summarize":
        try:
            summarize(args.csv, sys.stdout)
        except (OSError, ValueError) as exc:
            print(f"cannot summarize: {exc}", file=sys.stderr)
            return EXIT_FAILED
        return EXIT_OK
    return EXIT_OK if run_selfcheck(sys.stdout) else EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
