#!/usr/bin/env python3
"""Survival time vs fluctuation scale, for each of the three pulse knobs.

Reproduces the T(D_X/X) sweep family (area, quasi-period, width) at
gamma = 0.2, 0.5, 0.9 with 200-sample ensembles and bootstrap intervals.
Expect a few minutes per sweep single-threaded; pass e.g. `--threads 8`.
"""
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from randdd.expcli import main

OUT = Path(__file__).resolve().parents[1] / "results"

if __name__ == "__main__":
    extra = sys.argv[1:]
    rc = 0
    for param in ("phi", "tau", "delta"):
        rc |= main(["sweep", "--param", param, "--out", str(OUT / f"sweep_{param}")] + extra)
    sys.exit(rc)
