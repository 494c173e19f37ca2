"""Discrete extinction of a compactly supported bump against the continuum formula.

Usage: python3 scripts/bf_check.py [--sizes 64 128 256 512] [--mass 3]
"""

import argparse

from specflow import bonforte_figalli_check
from specflow.gallery import _hat


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[64, 128, 256, 512])
    ap.add_argument("--mass", type=float, default=3.0)
    args = ap.parse_args()
    print(f"{'n':>6} {'T*':>12} {'0.5 int f':>12} {'T rel err':>10} {'profile err':>12} {'segments':>9}")
    for n in args.sizes:
        rep = bonforte_figalli_check(_hat(n, args.mass))
        print(f"{n:6d} {rep['T_measured']:12.8g} {rep['T_predicted']:12.8g} {rep['T_rel_error']:10.2e} "
              f"{rep['profile_rel_error']:12.2e} {rep['n_segments']:9d}")


if __name__ == "__main__":
    main()
