#!/usr/bin/env python3
"""Walk the race-variant exploration of every corpus program and summarize.

Usage: python scripts/explore_demo.py [--seed N] [--depth D]
"""

import argparse
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))

from kerndbg import analysis  # noqa: E402
from kerndbg.lang import parse  # noqa: E402


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--depth", type=int, default=2)
    args = ap.parse_args()

    for path in sorted((ROOT / "corpus").glob("*.kern")):
        prog = parse(path.read_text())
        report = analysis.explore(
            prog, "main",
            analysis.ExploreConfig(max_depth=args.depth, seed=args.seed),
        )
        kinds = sorted({
            kind
            for run in report.explored
            for kind, hit in (
                ("blocked", run.symptoms.blocked),
                ("lost", run.symptoms.lost),
                ("orphan", run.symptoms.orphan),
            )
            if hit
        })
        print(
            f"{path.name:22s} runs={len(report.explored):3d} "
            f"infeasible={len(report.infeasible):3d} "
            f"symptoms={','.join(kinds) or '-'}"
        )
    return 0


if __name__ == "__main__":
    sys.exit(main())
