#!/usr/bin/env python3
"""Log-log slope of the median entrywise B error against N at k = optimal_k(N)."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from covsbm.cli import main as cli_main

HERE = Path(__file__).resolve().parent


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--plan", default=str(HERE / "plans" / "rate_logistic.json"))
    p.add_argument("--metric", default="B_err")
    p.add_argument("--out", default="results/slopes.csv")
    p.add_argument("--expect", type=float, default=-1 / 3)
    args = p.parse_args(argv)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    return cli_main(["sweep", "--plan", args.plan, "--metric", args.metric, "--out", args.out,
                     "--expect", str(args.expect)])


if __name__ == "__main__":
    sys.exit(main())
