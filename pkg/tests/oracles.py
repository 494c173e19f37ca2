"""Independent reference implementations used only by the tests.

Nothing here calls the package's solvers: exact rational arithmetic for the
event-driven flow, exhaustive active-set enumeration for box QPs and minimal
norm subgradients, and scipy's LP solver for the dual norm.
"""

from __future__ import annotations

import itertools
from fractions import Fraction
from typing import List, Optional, Sequence

import numpy as np
from scipy.optimize import linprog

Q = Fraction


def _frac_matrix(A) -> List[List[Fraction]]:
    return [[Q(x) if isinstance(x, (int, Fraction)) else Q(x).limit_denominator(10**12) for x in row] for row in A]


def solve_rational(M: List[List[Fraction]], b: List[Fraction]) -> Optional[List[Fraction]]:
    """One solution of ``M x = b`` by exact Gauss-Jordan elimination (free variables set to 0)."""
    rows = len(M)
    cols = len(M[0]) if rows else 0
    aug = [list(M[i]) + [b[i]] for i in range(rows)]
    pivots = []
    r = 0
    for c in range(cols):
        piv = next((i for i in range(r, rows) if aug[i][c] != 0), None)
        if piv is None:
            continue
        aug[r], aug[piv] = aug[piv], aug[r]
        inv = 1 / aug[r][c]
        aug[r] = [v * inv for v in aug[r]]
        for i in range(rows):
            if i != r and aug[i][c] != 0:
                fac = aug[i][c]
                aug[i] = [vi - fac * vr for vi, vr in zip(aug[i], aug[r])]
        pivots.append(c)
        r += 1
        if r == rows:
            break
    for i in range(r, rows):
        if aug[i][-1] != 0:
            return None
    x = [Q(0)] * cols
    for i, c in enumerate(pivots):
        x[c] = aug[i][-1]
    return x


def _matvec(A, x):
    return [sum((a * b for a, b in zip(row, x)), Q(0)) for row in A]


def _transpose(A):
    return [list(col) for col in zip(*A)]


def exact_min_norm_subgradient(A, u):
    """Minimal-norm subgradient of ``|A u|_1`` at ``u``, exactly.

    Enumerates lower/upper/interior status for each free dual coordinate and
    keeps the KKT point. Requires A to have full row rank (unique q).
    """
    AT = _transpose(A)
    z = _matvec(A, u)
    m = len(A)
    s = [Q(1) if zi > 0 else Q(-1) if zi < 0 else None for zi in z]
    free = [i for i in range(m) if s[i] is None]
    G = [[sum((A[i][k] * A[j][k] for k in range(len(u))), Q(0)) for j in range(m)] for i in range(m)]
    for status in itertools.product((-1, 0, 1), repeat=len(free)):
        q = [si if si is not None else Q(0) for si in s]
        interior = []
        for i, st in zip(free, status):
            if st == 0:
                interior.append(i)
            else:
                q[i] = Q(st)
        if interior:
            rhs = [-sum((G[i][j] * q[j] for j in range(m) if j not in interior), Q(0)) for i in interior]
            sol = solve_rational([[G[i][j] for j in interior] for i in interior], rhs)
            if sol is None:
                continue
            for i, v in zip(interior, sol):
                q[i] = v
        if any(abs(q[i]) > 1 for i in interior):
            continue
        grad = _matvec(G, q)
        ok = all(
            (st == 0 and grad[i] == 0) or (st == -1 and grad[i] >= 0) or (st == 1 and grad[i] <= 0)
            for i, st in zip(free, status)
        )
        if ok:
            return _matvec(AT, q), q
    raise RuntimeError("no KKT point found")


def exact_event_flow(A, f, max_events: int = 200):
    """Breakpoints and slopes of the flow ``u' = -A0 u`` in exact arithmetic."""
    A = _frac_matrix(A)
    u = [Q(x) if isinstance(x, (int, Fraction)) else Q(x).limit_denominator(10**12) for x in f]
    t = Q(0)
    bps, slopes = [t], []
    for _ in range(max_events):
        p, _ = exact_min_norm_subgradient(A, u)
        if all(pi == 0 for pi in p):
            return bps, slopes
        z = _matvec(A, u)
        w = _matvec(A, p)
        cands = [zi / wi for zi, wi in zip(z, w) if zi != 0 and wi != 0 and (zi > 0) == (wi > 0)]
        if not cands:
            raise RuntimeError("no event ahead")
        dt = min(cands)
        u = [ui - dt * pi for ui, pi in zip(u, p)]
        t += dt
        bps.append(t)
        slopes.append(p)
    raise RuntimeError("event cap")


def box_qp_enumerate(H, g, lo=-1.0, hi=1.0):
    """Exact box QP minimum by enumerating every active set (small k only)."""
    H = np.asarray(H, dtype=float)
    g = np.asarray(g, dtype=float)
    k = g.size
    lo = np.broadcast_to(np.asarray(lo, dtype=float), k)
    hi = np.broadcast_to(np.asarray(hi, dtype=float), k)
    best, best_x = np.inf, None
    for status in itertools.product((-1, 0, 1), repeat=k):
        st = np.array(status)
        x = np.where(st == -1, lo, np.where(st == 1, hi, 0.0)).astype(float)
        I = st == 0
        if I.any():
            rhs = -(g[I] + H[np.ix_(I, ~I)] @ x[~I])
            x[I] = np.linalg.lstsq(H[np.ix_(I, I)], rhs, rcond=None)[0]
            if np.any(x[I] < lo[I] - 1e-12) or np.any(x[I] > hi[I] + 1e-12):
                continue
        val = 0.5 * x @ H @ x + g @ x
        if val < best - 1e-14:
            best, best_x = val, x
    return best_x, best


def dual_norm_lp(A, g) -> float:
    """``min s`` subject to ``A'q = g``, ``-s <= q_i <= s`` as a linear program."""
    A = np.asarray(A, dtype=float)
    m, n = A.shape
    c = np.r_[np.zeros(m), 1.0]
    A_eq = np.c_[A.T, np.zeros(n)]
    I = np.eye(m)
    A_ub = np.r_[np.c_[I, -np.ones(m)], np.c_[-I, -np.ones(m)]]
    res = linprog(c, A_ub=A_ub, b_ub=np.zeros(2 * m), A_eq=A_eq, b_eq=g,
                  bounds=[(None, None)] * m + [(0, None)], method="highs")
    assert res.success, res.message
    return float(res.x[-1])


def face_vertex_inf(A, u, p, eps: float = 1e-12) -> float:
    """``inf <p, q>`` over dJ(u) by visiting every vertex of the face."""
    A = np.asarray(A, dtype=float)
    z = A @ np.asarray(u, dtype=float)
    scale = eps * (1.0 + np.max(np.abs(z)))
    w = A @ np.asarray(p, dtype=float)
    s = np.sign(np.where(np.abs(z) <= scale, 0.0, z))
    free = np.flatnonzero(s == 0)
    best = np.inf
    for signs in itertools.product((-1.0, 1.0), repeat=free.size):
        q = s.copy()
        q[free] = signs
        best = min(best, float(q @ w))
    return best


def l1_closed_form(f: Sequence[float], t: float) -> np.ndarray:
    """``(f_+ - t)_+ - (f_- - t)_+``."""
    f = np.asarray(f, dtype=float)
    return np.maximum(np.maximum(f, 0) - t, 0) - np.maximum(np.maximum(-f, 0) - t, 0)


def linf_flow_oracle(f, t: float) -> np.ndarray:
    """Max-norm flow: the top level set descends jointly until it reaches zero.

    Level ``L(t)`` solves ``sum_i (|f_i| - L)_+ = t`` (each unit of time removes
    one unit of ``l1`` mass above the level); entries are clipped at it.
    """
    f = np.asarray(f, dtype=float)
    a = np.abs(f)
    if t >= a.sum():
        return np.zeros_like(f)
    srt = np.sort(a)[::-1]
    cs = np.cumsum(srt)
    for k in range(1, a.size + 1):
        L = (cs[k - 1] - t) / k
        nxt = srt[k] if k < a.size else 0.0
        if L >= nxt:
            return np.sign(f) * np.minimum(a, L)
    return np.zeros_like(f)
