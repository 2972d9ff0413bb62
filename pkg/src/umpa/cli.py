"""Command-line front end for the benchmark experiments."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .bench import (
    EXPERIMENTS,
    ConfigError,
    ExperimentSpec,
    run_all,
    run_experiment,
    write_csv,
)
from .cost_model import resolve_profile


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="umpa-bench",
        description="Run allocation-regime experiments and emit CSV.",
    )
    parser.add_argument("--exp", default="all",
                        choices=[*EXPERIMENTS, "all"],
                        help="experiment to run (default: all)")
    parser.add_argument("--profile", default="windows7_x64",
                        help="builtin profile name or path to a key=value file")
    parser.add_argument("--sizes", default=None,
                        help="comma-separated block sizes in bytes "
                             "(sweep experiments only)")
    parser.add_argument("--iterations", type=int, default=5,
                        help="repeats for wall-time medians (default: 5)")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default="-",
                        help="output CSV path, - for stdout (default)")
    parser.add_argument("--timings", action="store_true",
                        help="add nondeterministic wall-clock rows")
    parser.add_argument("--batch-n", type=int, default=100_000,
                        help="allocation count for the batch experiment")
    return parser


def _parse_sizes(text: str | None) -> tuple[int, ...] | None:
    if text is None:
        return None
    try:
        sizes = tuple(int(part.strip()) for part in text.split(",") if part.strip())
    except ValueError as exc:
        raise ConfigError(f"bad --sizes value: {exc}") from None
    if not sizes:
        raise ConfigError("--sizes given but empty")
    return sizes


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2

    try:
        profile = resolve_profile(args.profile)
        spec = ExperimentSpec(
            name=args.exp,
            profile=profile,
            sizes=_parse_sizes(args.sizes),
            iterations=args.iterations,
            seed=args.seed,
            timings=args.timings,
            batch_n=args.batch_n,
        )
        if args.exp == "all":
            rows = run_all(spec)
        else:
            rows = run_experiment(args.exp, spec)
    except (ConfigError, KeyError, ValueError) as exc:
        print(f"umpa-bench: {exc}", file=sys.stderr)
        return 2

    if args.out == "-":
        write_csv(rows, sys.stdout)
    else:
        with Path(args.out).open("w", newline="") as fh:
            write_csv(rows, fh)
    return 0


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
