"""Recompute the reference values frozen in tests/frozen.py.

The references come from tests/oracles.py, which never calls into beclab's
grids or flows: a shooting method for the 1D Gross-Pitaevskii equation on the
half line and sparse inverse iteration for two particles.

    python3 scripts/freeze_oracles.py
"""
from __future__ import annotations

import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))

from oracles import gp_shooting_energy, two_body_inverse_power  # noqa: E402

from beclab.core import PairPotential  # noqa: E402  (profile evaluation only)


def main() -> None:
    out = {}
    for g in (1.0, 5.0):
        ref = gp_shooting_energy(g)
        out[f"gp_g{g:g}"] = {"energy": ref["energy"], "mu": ref["mu"]}
    pair = PairPotential.with_coupling("bump", 2.0, 1.0)
    for n in (65, 129):
        ref = two_body_inverse_power(n, 6.0, lambda x: x * x, pair)
        out[f"two_body_n{n}"] = {"energy": ref["energy"], "iterations": ref["iterations"]}
    print(json.dumps(out, indent=2))


if __name__ == "__main__":
    main()
