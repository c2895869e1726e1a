"""Chaos metrics across N at fixed beta and t, one table row per particle number.

Reads the run configuration (shipped default unless --config), solves through
the ground-state cache and runs the coupled simulations.

    python3 scripts/chaos_trend.py [--config PATH] [--beta 0.5] [--N 2 3 4] [--M 4000]
"""
from __future__ import annotations

import argparse
import time

from beclab.config import load_config
from beclab.pipeline import Session

COLUMNS = ("driftMismatch", "normalizedEntropy", "kMarginalTV1", "kacMetric", "kacBound")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=None)
    ap.add_argument("--beta", type=float, default=0.5)
    ap.add_argument("--N", type=int, nargs="+", default=None)
    ap.add_argument("--t", type=float, default=None)
    ap.add_argument("--M", type=int, default=None)
    args = ap.parse_args()
    session = Session(load_config(args.config))
    Ns = args.N or list(session.cfg.sweep.N)
    print("N  " + "  ".join(f"{c:>17}" for c in COLUMNS) + "  seconds")
    rows = []
    for N in Ns:
        start = time.perf_counter()
        cell = session.chaos_cell(N, args.beta, args.t, args.M)
        r = cell.report
        vals = (r.driftMismatch, r.normalizedEntropy, r.kMarginalTV[0], r.kacMetric,
                cell.kac_bound)
        rows.append(vals)
        print(f"{N:<3}" + "  ".join(f"{v:17.6e}" for v in vals)
              + f"  {time.perf_counter() - start:7.1f}", flush=True)
    for j, name in enumerate(COLUMNS[:4]):
        series = [row[j] for row in rows]
        ok = all(b <= a for a, b in zip(series, series[1:]))
        print(f"{name}: {'non-increasing' if ok else 'rises somewhere'}")


if __name__ == "__main__":
    main()
