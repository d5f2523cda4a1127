#!/usr/bin/env python3
"""End-to-end experiment: synthesize data, train the baseline, prune and
retrain at a retention ratio, evaluate both models on the shared test split,
and emit the comparison table plus plot-data CSVs.

Usage:
    python scripts/run_pipeline.py --out runs/demo [--ratio 0.5] [--seed 42]
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from signalprune import cli


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", required=True, help="directory for all artifacts")
    ap.add_argument("--ratio", type=float, default=0.5)
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--classes", type=int, default=3)
    ap.add_argument("--per-class", type=int, default=400)
    ap.add_argument("--length", type=int, default=178)
    ap.add_argument("--noise", type=float, default=0.3)
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    csv = out / "dataset.csv"
    base = out / "baseline"
    pruned = out / "pruned"

    steps = [
        ["synth", "--classes", str(args.classes), "--per-class", str(args.per_class),
         "--length", str(args.length), "--noise", str(args.noise),
         "--seed", str(args.seed), "--out", str(csv)],
        ["train", "--data", str(csv), "--out", str(base), "--seed", str(args.seed)],
        ["prune", "--model", str(base), "--out", str(pruned),
         "--ratio", str(args.ratio), "--verify"],
        ["eval", "--model", str(base)],
        ["eval", "--model", str(pruned)],
        ["report",
         "--baseline", str(base / "report.json"), "--pruned", str(pruned / "report.json"),
         "--baseline-history", str(base / "history.csv"),
         "--pruned-history", str(pruned / "history.csv"),
         "--out", str(out / "comparison")],
    ]
    for step in steps:
        print(f"$ signalprune {' '.join(step)}")
        code = cli.main(step)
        if code != 0:
            return code
    print((out / "comparison" / "comparison.md").read_text())
    return 0


if __name__ == "__main__":
    sys.exit(main())
