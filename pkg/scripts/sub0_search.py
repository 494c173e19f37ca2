"""Exhaustive search for orthogonal eigenvector pairs admitting the SUB0 synthesis.

The flow emits the minimal-norm subgradient of a state, so each jump-sign
pattern in {-1, 0, 1}^m is realized by one state; its minimal-norm subgradient
is kept when it is an eigenvector. Each orthogonal pair is then tested for a
suffix sum that stays in K.

Usage: python3 scripts/sub0_search.py [--nmax 8] [--dirichlet]
"""

import argparse
import itertools

import numpy as np

from specflow import is_eigenvector, membership_in_K, min_norm_subgradient, tv1d, tv1d_dirichlet


def eigenvectors(F):
    found = {}
    for signs in itertools.product((-1, 0, 1), repeat=F.m):
        if not any(signs):
            continue
        # a piecewise-constant vector with the given jump signs
        jumps = np.array(signs, dtype=float)
        u = np.linalg.lstsq(F.A, jumps, rcond=None)[0]
        sub = min_norm_subgradient(F, u)
        if sub.norm == 0:
            continue
        p = sub.p  # already scaled to eigenvalue 1 when it is an eigenvector
        if is_eigenvector(F, sub)[0]:
            found[tuple(np.round(p, 10))] = p
    return list(found.values())


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--nmax", type=int, default=7)
    ap.add_argument("--dirichlet", action="store_true")
    args = ap.parse_args()
    for n in range(3 if not args.dirichlet else 2, args.nmax + 1):
        F = tv1d_dirichlet(n) if args.dirichlet else tv1d(n)
        eig = eigenvectors(F)
        admissible = 0
        for p, q in itertools.combinations(eig, 2):
            if abs(p @ q) > 1e-9:
                continue
            for a, b in ((p, q), (q, p)):
                if membership_in_K(F, a + b)[0]:
                    admissible += 1
        print(f"{F.label}: {len(eig)} eigenvectors, {admissible} admissible orthogonal pairs")


if __name__ == "__main__":
    main()
