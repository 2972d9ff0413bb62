#!/usr/bin/env python3
"""Run the full experiment matrix for both builtin cost profiles.

Writes one CSV per profile to the output directory and prints the
headline comparisons (allocation overhead, realloc speedup, batch
ratio) to stdout.  Everything is ledger-derived, so repeat runs with
the same seed produce identical files.

Usage:
    python3 scripts/run_experiments.py [--out-dir out] [--seed 42] [--timings]
"""

from __future__ import annotations

import argparse
from pathlib import Path

from umpa.bench import ExperimentSpec, run_all, write_csv
from umpa.cost_model import builtin_profiles


def headline(rows) -> list[str]:
    picks = {
        ("fault", "faulted_baseline", 16384, "cycles_per_page"): "baseline fault cyc/page @16K",
        ("fault", "umpa", 16384, "cycles_per_page"): "umpa map cyc/page @16K",
        ("realloc", "both", 262144, "speedup"): "realloc 128K->256K speedup",
        ("batch", "both", 64, "batch_to_loop_ratio"): "batch/loop cycle ratio",
    }
    lines = []
    for r in rows:
        key = (r.experiment, r.engine, r.size_bytes, r.metric)
        if key in picks:
            lines.append(f"  {picks[key]}: {r.value:g}")
    speedups = [r.value for r in rows
                if r.experiment == "speedup" and r.metric == "speedup"]
    if speedups:
        lines.append(f"  workload speedup per bucket: min {min(speedups):.1f}x,"
                     f" max {max(speedups):.1f}x")
    return lines


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out-dir", default="out", type=Path)
    parser.add_argument("--seed", default=42, type=int)
    parser.add_argument("--timings", action="store_true",
                        help="add wall-clock rows (breaks byte-reproducibility)")
    args = parser.parse_args()

    args.out_dir.mkdir(parents=True, exist_ok=True)
    for name, profile in builtin_profiles().items():
        spec = ExperimentSpec(name=f"all-{name}", profile=profile,
                              seed=args.seed, timings=args.timings)
        rows = run_all(spec)
        out = args.out_dir / f"results_{name}.csv"
        with out.open("w", newline="") as fh:
            write_csv(rows, fh)
        print(f"{name}: {len(rows)} rows -> {out}")
        print("\n".join(headline(rows)))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
