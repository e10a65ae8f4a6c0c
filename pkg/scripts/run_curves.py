#!/usr/bin/env python3
"""Fidelity-evolution curve families at gamma = 0.3.

Three families: regular vs random at several duty cycles, the
(D_width, D_period) combinations at fixed means, and per-initial-state
curves. Each family takes seconds per ensemble.
"""
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from randdd.expcli import main

OUT = Path(__file__).resolve().parents[1] / "results"

if __name__ == "__main__":
    extra = sys.argv[1:]
    rc = 0
    for family in ("delta", "deltatau", "mu"):
        rc |= main(["curves", "--family", family, "--out", str(OUT / f"curves_{family}")] + extra)
    sys.exit(rc)
