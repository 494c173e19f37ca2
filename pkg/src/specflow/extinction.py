"""Extinction time, dual norm, ground state, Poincare constant and extinction profiles."""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import PolyhedralFunctional, as_array, evaluate_J, membership_in_K, nullspace_project
from .minsub import is_eigenvector
from .qp import box_least_squares

log = logging.getLogger(__name__)


class NotExtinctError(ValueError):
    pass


def _require_extinct(traj):
    if not traj.extinct:
        raise NotExtinctError(f"trajectory did not reach extinction (status {traj.status!r})")


def extinction_time(traj) -> float:
    _require_extinct(traj)
    return traj.T


# ---------------------------------------------------------------- dual norm


@dataclass(frozen=True)
class DualNormResult:
    value: float
    q: np.ndarray  # A'q = f - f_bar with |q|_inf = value (l1 certificate for linf)
    residual: float
    method: str


def dual_norm(F: PolyhedralFunctional, f, tol: Optional[float] = None, certificate: bool = False):
    """``sup_{u in N(J)^perp} <f, u> / J(u)``, i.e. ``min |q|_inf`` subject to ``A'q = f - f_bar``.

    Full-row-rank operators have a unique certificate; otherwise bisection on
    the box half-width with a box least-squares feasibility test.
    """
    f = as_array(f)
    g = f - nullspace_project(F, f)
    scale = 1.0 + float(np.linalg.norm(f))
    if tol is None:
        tol = 1e-9 * scale
    if F.is_linf:
        res = DualNormResult(float(np.sum(np.abs(g))), g.copy(), 0.0, "l1")
        return res if certificate else res.value
    if float(np.linalg.norm(g)) <= 1e-13 * scale:  # f = f_bar up to rounding
        res = DualNormResult(0.0, np.zeros(F.m), 0.0, "trivial")
        return res if certificate else res.value
    AT = F.A.T
    q_ls = np.linalg.lstsq(AT, g, rcond=None)[0]
    r_ls = float(np.linalg.norm(AT @ q_ls - g))
    if r_ls > tol:
        raise ValueError(f"f - f_bar is not in the range of A' (residual {r_ls:.3e})")
    if F.full_row_rank:
        res = DualNormResult(float(np.max(np.abs(q_ls))), q_ls, r_ls, "direct")
        return res if certificate else res.value

    lo, hi = 0.0, float(np.max(np.abs(q_ls)))
    q_hi, r_hi = q_ls, r_ls
    width = 1e-10 * scale
    warm = None
    while hi - lo > width:
        s = 0.5 * (lo + hi)
        out = box_least_squares(AT, g, -s, s, x0=warm, raise_on_fail=False)
        r = float(np.linalg.norm(AT @ out.x - g))
        if r <= tol:
            hi, q_hi, r_hi = s, out.x, r
        else:
            lo = s
        warm = out.x
    res = DualNormResult(hi, q_hi, r_hi, "bisection")
    return res if certificate else res.value


# ---------------------------------------------------------------- ground state


@dataclass(frozen=True)
class GroundStateOptions:
    starts: int = 32
    max_iter: int = 500
    enum_limit: int = 20000  # max row subsets for exact vertex enumeration
    seed: int = 0


@dataclass(frozen=True)
class GroundState:
    u: np.ndarray
    lam: float
    certified: bool
    method: str


def _ground_state_full_rank(F):
    # {u in N^perp : |Au|_1 <= 1} = A^+ (l1 ball); its vertices are the columns of A^+
    Ap = np.linalg.pinv(F.A)
    norms = np.linalg.norm(Ap, axis=0)
    i = int(np.argmax(norms))
    u = Ap[:, i] / norms[i]
    return GroundState(u, float(evaluate_J(F, u)), True, "vertex_pinv")


def _ground_state_enumerate(F, B, M):
    d = B.shape[1]
    best_u, best = None, np.inf
    for rows in itertools.combinations(range(M.shape[0]), d - 1):
        Mz = M[list(rows)]
        if d > 1:
            _, sv, vt = np.linalg.svd(Mz)
            if sv[-1] <= 1e-10 * max(1.0, sv[0]):
                continue  # zero set does not pin down a line
            c = vt[-1]
        else:
            c = np.ones(1)
        u = B @ c
        val = evaluate_J(F, u) / np.linalg.norm(u)
        if val < best - 1e-15:
            best, best_u = val, u / np.linalg.norm(u)
    return GroundState(best_u, float(best), True, "vertex_enumeration")


def _inverse_power(F, B, opts: GroundStateOptions):
    """Multi-start descent ``u <- (lam u - P_K(lam u)) / |...|``, restricted to N^perp."""
    rng = np.random.default_rng(opts.seed)
    d = B.shape[1]
    best_u, best = None, np.inf
    for _ in range(opts.starts):
        u = B @ rng.standard_normal(d)
        u /= np.linalg.norm(u)
        lam = evaluate_J(F, u)
        for _ in range(opts.max_iter):
            _, sub = membership_in_K(F, lam * u)
            v = lam * u - F.A.T @ sub.q
            v = B @ (B.T @ v)
            nv = np.linalg.norm(v)
            if nv <= 1e-14:
                break
            v /= nv
            lam_new = evaluate_J(F, v)
            if lam_new >= lam * (1.0 - 1e-14):
                break
            u, lam = v, lam_new
        if lam < best:
            best, best_u = lam, u
    return GroundState(best_u, float(best), False, "inverse_power")


def ground_state(F: PolyhedralFunctional, opts: Optional[GroundStateOptions] = None) -> GroundState:
    """Minimizer of J on the unit sphere of N(J)^perp and the value ``lambda_0``."""
    opts = opts or GroundStateOptions()
    if F.is_linf:
        u = np.ones(F.n) / math.sqrt(F.n)
        return GroundState(u, 1.0 / math.sqrt(F.n), True, "closed_form")
    B = F.range_basis
    d = B.shape[1]
    if d == 0:
        raise ValueError("N(J)^perp is trivial: J vanishes identically")
    if F.full_row_rank:
        return _ground_state_full_rank(F)
    M = F.A @ B
    if math.comb(M.shape[0], d - 1) <= opts.enum_limit:
        return _ground_state_enumerate(F, B, M)
    log.info("ground state: %d-dim problem too large for enumeration; multi-start search", d)
    return _inverse_power(F, B, opts)


def poincare_constant(F: PolyhedralFunctional, opts: Optional[GroundStateOptions] = None):
    """``C = 1 / lambda_0``; returns ``(C, certified)``."""
    gs = ground_state(F, opts)
    return 1.0 / gs.lam, gs.certified


# ---------------------------------------------------------------- profile and identities


def extinction_profile(traj, n_samples: int = 8):
    """Final slope ``p*`` with its eigenvector defect and ``|p(t) - w(t)|`` samples.

    ``w(t) = (u(t) - f_bar) / (T* - t)`` coincides with ``p*`` on the last segment.
    """
    from .flow import evaluate_at

    _require_extinct(traj)
    if traj.n_segments == 0:
        raise NotExtinctError("trajectory has no segments (f = f_bar); no profile")
    F = traj.functional
    K = traj.n_segments
    p_star = traj.slopes[K - 1].copy()
    ok, defect = is_eigenvector(F, traj.subgradient(K - 1))
    T = traj.T
    ts = T * (1.0 - 0.5 ** np.arange(1, n_samples + 1))
    dev = []
    for t in ts:
        u, p = evaluate_at(traj, t)
        dev.append(float(np.linalg.norm(p - (u - traj.f_bar) / (T - t))))
    return p_star, {"eigen_ok": bool(ok), "eigen_defect": float(defect), "t": ts.tolist(), "p_minus_w": dev}


@dataclass
class ExtinctionReport:
    T_star: float
    dual_norm: float
    poincare_C: float
    poincare_certified: bool
    profile: np.ndarray
    profile_eigen_defect: float
    identity_gap: float
    lower_slack: float  # T* - |f|_*
    upper_slack: float  # C |f - f_bar| - T*
    trajectory_C: float
    certified: bool
    checks: dict = field(default_factory=dict)

    @property
    def all_passed(self) -> bool:
        return all(self.checks.values())


def extinction_identities(F: PolyhedralFunctional, f, traj, tol: float = 1e-7, strict: bool = False,
                          gs_opts: Optional[GroundStateOptions] = None) -> ExtinctionReport:
    """Extinction time against its dual-norm and Poincare bounds, and the profile identities.

    ``checks`` records each identity; with ``strict`` a failed check on a
    certified run raises ``AssertionError``.
    """
    from .spectral import hierarchy_check

    f = as_array(f)
    _require_extinct(traj)
    g = f - traj.f_bar
    gnorm = float(np.linalg.norm(g))
    T = traj.T
    dn = dual_norm(F, f)
    C, C_cert = poincare_constant(F, gs_opts)
    if traj.n_segments == 0:
        return ExtinctionReport(0.0, dn, C, C_cert, np.zeros(F.n), 0.0, 0.0, 0.0, 0.0, 0.0, True,
                                {"degenerate": True})
    p_star, diag = extinction_profile(traj)
    Jp = evaluate_J(F, p_star)
    ratio = float(f @ p_star) / Jp
    identity_gap = abs(T - ratio)
    traj_C = max(
        float(np.linalg.norm(traj.states[k] - traj.f_bar)) / evaluate_J(F, traj.states[k])
        for k in range(traj.n_segments)
    )
    certified = bool(hierarchy_check(traj))
    rayleigh = evaluate_J(F, p_star / np.linalg.norm(p_star))
    checks = {
        "lower_bound": T - dn >= -tol,
        "upper_bound": C * gnorm - T >= -tol,
        "profile_eigenvector": diag["eigen_ok"],
    }
    if certified:
        checks["identity"] = identity_gap <= 1e-8 * max(T, 1.0)
        checks["dual_norm_equality"] = abs(T - dn) <= tol * max(1.0, T)
        checks["rayleigh_bound"] = rayleigh <= gnorm / dn + 1e-8
    rep = ExtinctionReport(T, dn, C, C_cert, p_star, diag["eigen_defect"], identity_gap, T - dn, C * gnorm - T,
                           traj_C, certified, checks)
    if strict and certified and not rep.all_passed:
        failed = [k for k, v in checks.items() if not v]
        raise AssertionError(f"extinction identities failed: {failed}")
    return rep


# ---------------------------------------------------------------- Bonforte-Figalli


def bonforte_figalli_check(f, h: Optional[float] = None, opts=None) -> dict:
    """Compare the extinction of a nonnegative bump with ``T = 0.5 int f`` and ``p* = 2/(b-a) chi``.

    The signal lives on a grid of spacing ``h`` (default ``1/n``) and is
    extended by zero outside; the flow uses the zero-padded TV and the
    physical inner product ``h sum u v``, hence ``T = h T_grid`` and
    ``p* = p*_grid / h``.
    """
    from .flow import run_event_driven
    from .functionals import tv1d_dirichlet

    f = as_array(f)
    n = f.size
    if np.any(f < 0):
        raise ValueError("bonforte_figalli_check needs f >= 0")
    h = 1.0 / n if h is None else float(h)
    if not np.any(f):
        return {"T_measured": 0.0, "T_predicted": 0.0, "T_rel_error": 0.0, "profile_rel_error": 0.0,
                "support": None, "h": h}
    supp = np.flatnonzero(f > 0)
    a, b = int(supp[0]), int(supp[-1]) + 1
    if a == 0 or b == n:
        raise ValueError("support must lie strictly inside the grid")
    F = tv1d_dirichlet(n)
    traj = run_event_driven(F, f, opts)
    T = h * traj.T
    T_pred = 0.5 * float(np.sum(f)) * h
    p_star = traj.slopes[-1] / h
    plateau = 2.0 / ((b - a) * h)
    interior = np.arange(a, b)
    if interior.size > 2:
        interior = interior[1:-1]
    prof_err = float(np.max(np.abs(p_star[interior] - plateau))) / plateau
    outside = np.ones(n, dtype=bool)
    outside[a:b] = False
    return {
        "T_measured": T,
        "T_predicted": T_pred,
        "T_rel_error": abs(T - T_pred) / T_pred,
        "profile": p_star,
        "plateau": plateau,
        "profile_rel_error": prof_err,
        "profile_outside_max": float(np.max(np.abs(p_star[outside]), initial=0.0)),
        "support": (a, b),
        "h": h,
        "n_segments": traj.n_segments,
    }
