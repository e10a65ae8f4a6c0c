#!/usr/bin/env python3
"""Cross-method closure: closed form vs RK4 vs damped-mode master equation."""
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from randdd.expcli import main

OUT = Path(__file__).resolve().parents[1] / "results" / "oracle"

if __name__ == "__main__":
    sys.exit(main(["oracle-check", "--out", str(OUT)] + sys.argv[1:]))
