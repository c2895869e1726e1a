"""Scattering length of the scaled pair potential against its coupling.

For each N the potential N^(3 beta - 3) v0(N^(beta - 1) r) keeps the integral
g of v0 while spreading out; 4 pi a_N stays below g and the ratio
4 pi a_N / g tends to 1 as N grows when beta < 1.

    python3 scripts/scattering_sweep.py [--coupling 1] [--radius 1] [--beta 0.5] [--N 2 8 32 128]
"""
from __future__ import annotations

import argparse

from beclab.core import PairPotential
from beclab.scattering import scattering_limit_sweep


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--profile", default="bump")
    ap.add_argument("--coupling", type=float, default=1.0)
    ap.add_argument("--radius", type=float, default=1.0)
    ap.add_argument("--beta", type=float, default=0.5)
    ap.add_argument("--N", type=int, nargs="+", default=[2, 8, 32, 128, 512])
    args = ap.parse_args()
    v0 = PairPotential.with_coupling(args.profile, args.coupling, args.radius, dim=3)
    print(f"{'N':>5} {'a_N':>14} {'4pi a_N':>14} {'g':>14} {'ratio':>10}")
    for row in scattering_limit_sweep(v0, args.beta, args.N):
        print(f"{row.N:5d} {row.a:14.6e} {row.four_pi_a:14.6e} {row.g:14.6e} "
              f"{row.four_pi_a / row.g:10.6f}")


if __name__ == "__main__":
    main()
