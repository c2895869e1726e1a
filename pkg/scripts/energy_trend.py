"""Per-particle energy gap |E_N / N - E_nls| for N = 2, 3, 4 on the default grid.

Solves go through the ground-state cache, so reruns are cheap.

    python3 scripts/energy_trend.py [--config PATH] [--beta 0 0.25 0.5]
"""
from __future__ import annotations

import argparse
import time

from beclab.config import load_config
from beclab.pipeline import Session


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=None)
    ap.add_argument("--beta", type=float, nargs="+", default=[0.0, 0.25, 0.5])
    ap.add_argument("--N", type=int, nargs="+", default=[2, 3, 4])
    args = ap.parse_args()
    session = Session(load_config(args.config))
    e_nls = session.nls().energy
    print(f"E_nls = {e_nls:.12f}")
    for beta in args.beta:
        gaps = []
        for N in args.N:
            start = time.perf_counter()
            st = session.nbody(N, beta)
            gaps.append(abs(st.energy / N - e_nls))
            print(f"beta={beta:g} N={N} E_N/N={st.energy / N:.12f} gap={gaps[-1]:.6e} "
                  f"({time.perf_counter() - start:.0f} s)", flush=True)
        trend = all(b <= a for a, b in zip(gaps, gaps[1:]))
        print(f"beta={beta:g} non-increasing: {trend}")


if __name__ == "__main__":
    main()
