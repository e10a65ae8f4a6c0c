#!/usr/bin/env python3
"""Uncontrolled baselines plus the regular-control reference survival times.

Writes results/baseline/: the no-control T(0.95) table for
gamma = 0.2, 0.5, 0.9 and the regular-control counterpart. Runs in seconds.
"""
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from randdd.expcli import main

OUT = Path(__file__).resolve().parents[1] / "results" / "baseline"

if __name__ == "__main__":
    rc = main(["threshold", "--no-control", "--out", str(OUT)])
    rc |= main(["threshold", "--regular", "--out", str(OUT / "regular")])
    sys.exit(rc)
