#!/usr/bin/env python3
"""Regenerate the golden trajectory CSVs from the shipped configs.

The goldens under tests/goldens/ are the determinism contract: identical
config and seed must reproduce them byte for byte.
"""

import sys
from pathlib import Path

from prepost.cli import main

REPO = Path(__file__).resolve().parents[1]
SCENARIOS = ("spinbath_exact", "spinbath_env_post", "perturbative_spin", "burst")


def run() -> int:
    for name in SCENARIOS:
        cfg = REPO / "configs" / f"{name}.json"
        out = REPO / "tests" / "goldens" / f"{name}.csv"
        code = main(["run", "--config", str(cfg), "--out", str(out)])
        if code != 0:
            return code
    return 0


if __name__ == "__main__":
    sys.exit(run())
