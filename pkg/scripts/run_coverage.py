#!/usr/bin/env python3
"""Monte Carlo coverage of the finite-sample bounds for one experiment plan.

Writes records.csv and summary.json to --out and prints one line per check.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from covsbm.cli import main as cli_main

HERE = Path(__file__).resolve().parent


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--plan", default=str(HERE / "plans" / "coverage_planted.json"))
    p.add_argument("--out", default="results/coverage")
    args = p.parse_args(argv)
    return cli_main(["verify", "--plan", args.plan, "--out", args.out])


if __name__ == "__main__":
    sys.exit(main())
