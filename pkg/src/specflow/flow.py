"""Exact gradient flow ``du/dt = -p``, ``p`` the minimal-norm subgradient of J at u.

For polyhedral J the slope is piecewise constant in time, so the flow is
integrated exactly segment by segment: at each breakpoint compute ``p``, then
advance until the first dual coordinate ``(Au)_i`` reaches zero (or, for the
max-norm, until the maximal level meets the next level). An implicit Euler
scheme is kept alongside as an independent oracle.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .core import PolyhedralFunctional, Subgradient, as_array, evaluate_J, nullspace_project, _check_dim
from .minsub import (
    SignPattern,
    SubgradientOptions,
    is_eigenvector,
    sign_pattern,
    subgradient_on_pattern,
    zero_threshold,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class FlowOptions:
    max_events: Optional[int] = None  # None -> max(10 m, 10)
    eps_z_rel: float = 1e-9
    qp_tol_rel: float = 1e-10
    qp_max_iter: int = 200
    verify_each_segment: bool = False
    eigen_tol: float = 1e-8
    pattern_cap: int = 64
    extinction_tol_rel: float = 1e-10
    simultaneous_rel: float = 1e-9
    fallback_dt_rel: float = 1e-6

    def __post_init__(self):
        if self.max_events is not None and self.max_events < 1:
            raise ValueError("max_events must be positive")
        if self.pattern_cap < 1 or self.qp_max_iter < 1:
            raise ValueError("iteration caps must be positive")

    @property
    def subgradient(self) -> SubgradientOptions:
        return SubgradientOptions(self.eps_z_rel, self.qp_tol_rel, self.qp_max_iter)


@dataclass
class Trajectory:
    """Piecewise-linear flow: ``u(t) = u_k - (t - t_k) p_k`` on ``[t_k, t_{k+1})``."""

    functional: PolyhedralFunctional
    breakpoints: np.ndarray  # (K+1,)
    states: np.ndarray  # (K+1, n)
    slopes: np.ndarray  # (K, n)
    certificates: List[np.ndarray]  # K arrays of length m
    extinct: bool
    f_bar: np.ndarray
    segments: List[dict] = field(default_factory=list)
    status: str = "extinct"

    @property
    def f(self) -> np.ndarray:
        return self.states[0]

    @property
    def n_segments(self) -> int:
        return self.slopes.shape[0]

    @property
    def T(self) -> float:
        return float(self.breakpoints[-1])

    def subgradient(self, k: int) -> Subgradient:
        info = self.segments[k] if k < len(self.segments) else {}
        pattern = info.get("pattern")
        return Subgradient(self.slopes[k], self.certificates[k], info.get("cert_residual", 0.0),
                           None if pattern is None else SignPattern(np.asarray(pattern, dtype=np.int8)))

    @property
    def certified_eigen(self) -> bool:
        """True when every segment was checked and passed the eigenvector test."""
        return all(s.get("eigen_ok") is True for s in self.segments)


class FlowAbort(RuntimeError):
    """Numerical abort; ``trajectory`` holds the partial result."""

    def __init__(self, message, trajectory, diagnostic=None):
        super().__init__(message)
        self.trajectory = trajectory
        self.diagnostic = diagnostic or {}


def _consistent_subgradient(F, u, opts: FlowOptions, warm, force_free):
    """Subgradient whose sign pattern agrees with the motion it induces.

    Free coordinates that the slope pushes off zero are fixed at the sign of
    their motion and the face problem is re-solved, until the pattern stops
    changing. Returns ``(sub, iterations)`` or ``(None, iterations)`` on a
    cycle or when the cap is hit.
    """
    sopts = opts.subgradient
    P = sign_pattern(F, u, opts.eps_z_rel)
    if F.is_linf:
        return subgradient_on_pattern(F, P, sopts), 1
    if force_free is not None and force_free.size:
        s = P.signs.copy()
        s[force_free] = 0
        P = SignPattern(s)
    visited = set()
    q_warm = warm
    for it in range(1, opts.pattern_cap + 1):
        sub = subgradient_on_pattern(F, P, sopts, q_warm)
        w = F.A @ sub.p
        eps_w = zero_threshold(w, opts.eps_z_rel)
        free = P.signs == 0
        moving = free & (np.abs(w) > eps_w)
        if not moving.any():
            return sub, it
        s_new = P.signs.copy()
        s_new[moving] = -np.sign(w[moving]).astype(np.int8)
        P_new = SignPattern(s_new)
        if np.allclose(sub.q[moving], s_new[moving], rtol=0.0, atol=1e-12):
            # q already sits on the bound the motion selects: same optimum on the smaller face
            return Subgradient(sub.p, sub.q, sub.residual, P_new), it
        visited.add(P.key)
        if P_new.key in visited:
            return None, it
        P, q_warm = P_new, sub.q
    return None, opts.pattern_cap


def _next_event(F, u, sub: Subgradient, opts: FlowOptions):
    """Time to the next breakpoint and the coordinates that hit it."""
    p = sub.p
    if F.is_linf:
        a = np.abs(u)
        on = sub.pattern.signs != 0
        k = int(np.count_nonzero(on))
        M = float(np.max(a))
        rest = a[~on]
        L = float(np.max(rest)) if rest.size else 0.0
        dt = (M - L) * k
        hits = np.flatnonzero(~on & (a >= L - opts.eps_z_rel * (1.0 + M)))
        return dt, hits
    z = F.A @ u
    w = F.A @ p
    fixed = sub.pattern.signs != 0
    # only coordinates that were nonzero at the breakpoint and move towards zero
    eps = zero_threshold(z, opts.eps_z_rel)
    cand = fixed & (np.abs(z) > eps) & (np.sign(z) == np.sign(w)) & (w != 0.0)
    if not cand.any():
        return None, np.zeros(0, dtype=int)
    tau = np.full(z.shape, np.inf)
    tau[cand] = z[cand] / w[cand]
    dt = float(np.min(tau))
    hits = np.flatnonzero(tau <= dt * (1.0 + opts.simultaneous_rel))
    return dt, hits


def _segment_certificate(F, u0, p, q, dt):
    """Check p in dJ(u(t)) at the segment midpoint; returns the duality gap."""
    um = u0 - 0.5 * dt * p
    Jm = evaluate_J(F, um)
    if F.is_linf:
        return abs(Jm - float(q @ um)) / (1.0 + Jm)
    return abs(Jm - float(q @ (F.A @ um))) / (1.0 + Jm)


def _fallback_step(F, u, opts: FlowOptions):
    from .equivalence import vp_solve

    delta = opts.fallback_dt_rel * max(1.0, float(np.linalg.norm(u)))
    sol = vp_solve(F, u, delta)
    slope = (u - sol.v) / delta
    return delta, sol, slope


def run_event_driven(F: PolyhedralFunctional, f, opts: Optional[FlowOptions] = None) -> Trajectory:
    """Integrate the gradient flow exactly from ``u(0) = f`` until extinction.

    Raises :class:`FlowAbort` (carrying the partial trajectory) when the event
    cap is exceeded or no breakpoint can be found.
    """
    opts = opts or FlowOptions()
    f = as_array(f)
    _check_dim(F, f)
    f_bar = nullspace_project(F, f)
    max_events = opts.max_events or max(10 * F.m, 10)
    ext_tol = opts.extinction_tol_rel * (1.0 + float(np.linalg.norm(f)))

    t = 0.0
    u = f.copy()
    bps, states, slopes, certs, segs = [0.0], [u.copy()], [], [], []
    warm = None
    force_free = None
    extinct = False

    def build(status):
        return Trajectory(
            F,
            np.array(bps),
            np.array(states),
            np.array(slopes).reshape(len(slopes), F.n),
            certs,
            extinct,
            f_bar,
            segs,
            status,
        )

    for k in range(max_events + 1):
        sub, pattern_iters = _consistent_subgradient(F, u, opts, warm, force_free)
        fallback = False
        if sub is None:
            log.warning("pattern fixed point failed at t=%.6g; taking an implicit Euler micro-step", t)
            fallback = True
            dt, sol, slope = _fallback_step(F, u, opts)
            u_next = sol.v
            seg = {
                "t0": t, "t1": t + dt, "fallback": True, "certified": False,
                "pattern_iterations": pattern_iters, "eigen_ok": None,
            }
            bps.append(t + dt)
            slopes.append(slope)
            certs.append(np.clip(sol.q, -1.0, 1.0) if sol.q is not None else np.zeros(F.m))
            segs.append(seg)
            t += dt
            u = u_next
            states.append(u.copy())
            warm, force_free = None, None
            continue

        p = sub.p
        if np.linalg.norm(p) <= ext_tol:
            extinct = True
            break
        if k == max_events:
            raise FlowAbort(f"event cap {max_events} exceeded at t={t:.6g}", build("max_events"),
                            {"t": t, "events": k})
        dt, hits = _next_event(F, u, sub, opts)
        if dt is None or not np.isfinite(dt) or dt <= 0.0:
            raise FlowAbort(f"no breakpoint ahead at t={t:.6g} although |p| = {np.linalg.norm(p):.3e}",
                            build("no_event"), {"t": t, "p_norm": float(np.linalg.norm(p))})
        u_next = u - dt * p
        seg = {
            "t0": t,
            "t1": t + dt,
            "fallback": fallback,
            "pattern_iterations": pattern_iters,
            "pattern": sub.pattern.signs.astype(int).tolist(),
            "hits": hits.tolist(),
            "cert_gap": _segment_certificate(F, u, p, sub.q, dt),
        }
        seg["certified"] = bool(seg["cert_gap"] <= 1e-9)
        if opts.verify_each_segment:
            ok, defect = is_eigenvector(F, sub, opts.eigen_tol)
            seg["eigen_ok"] = bool(ok)
            seg["eigen_defect"] = float(defect)
        else:
            seg["eigen_ok"] = None
        bps.append(t + dt)
        slopes.append(p.copy())
        certs.append(sub.q.copy())
        segs.append(seg)
        t += dt
        u = u_next
        if np.linalg.norm(u - f_bar) <= ext_tol:
            u = f_bar.copy()  # rounding residue from the final event
        states.append(u.copy())
        warm = sub.q
        force_free = None if F.is_linf else hits
    return build("extinct")


def evaluate_at(traj: Trajectory, t: float):
    """``(u(t), p(t))`` with ``p`` right-continuous."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    b = traj.breakpoints
    if t >= b[-1]:
        if traj.extinct:
            return traj.f_bar.copy(), np.zeros_like(traj.f_bar)
        raise ValueError(f"t={t} lies beyond the computed (non-extinct) trajectory")
    k = int(np.searchsorted(b, t, side="right") - 1)
    return traj.states[k] - (t - b[k]) * traj.slopes[k], traj.slopes[k].copy()


def dissipation_report(traj: Trajectory, rtol: float = 1e-8):
    """Per-segment check of ``J(u_{k+1}) - J(u_k) = -(t_{k+1} - t_k) |p_k|^2``."""
    F = traj.functional
    out = []
    for k in range(traj.n_segments):
        J0 = evaluate_J(F, traj.states[k])
        J1 = evaluate_J(F, traj.states[k + 1])
        dt = traj.breakpoints[k + 1] - traj.breakpoints[k]
        expected = -dt * float(traj.slopes[k] @ traj.slopes[k])
        scale = max(J0, abs(expected), 1e-300)
        err = abs((J1 - J0) - expected) / scale
        out.append({"segment": k, "dJ": J1 - J0, "expected": expected, "rel_error": err, "ok": bool(err <= rtol)})
    return out


def short_time_report(traj: Trajectory, n_samples: int = 12):
    """``J(f - u(t))`` on a geometric sequence of times decreasing to zero."""
    F = traj.functional
    if traj.n_segments == 0:
        return {"t": [], "J": [], "checked": False, "monotone": True}
    t_first = traj.breakpoints[1]
    ts = t_first * 0.5 ** np.arange(1, n_samples + 1)
    vals = [evaluate_J(F, traj.f - evaluate_at(traj, t)[0]) for t in ts]
    checked = traj.certified_eigen
    monotone = bool(np.all(np.diff(vals) <= 1e-12 * (1.0 + abs(vals[0]))))
    return {"t": ts.tolist(), "J": vals, "checked": checked, "monotone": monotone}


@dataclass
class EulerPath:
    times: np.ndarray
    states: np.ndarray
    dt: float

    def at(self, t: float) -> np.ndarray:
        """Linear interpolation between implicit Euler samples."""
        return np.array([np.interp(t, self.times, self.states[:, i]) for i in range(self.states.shape[1])])


def run_implicit_euler(F: PolyhedralFunctional, f, dt: float, T_max: float, method: str = "auto") -> EulerPath:
    """Minimizing movements ``u_{k+1} = argmin 0.5|v - u_k|^2 + dt J(v)``."""
    from .equivalence import vp_solve

    if dt <= 0:
        raise ValueError("dt must be positive")
    u = as_array(f)
    _check_dim(F, u)
    f_bar = nullspace_project(F, u)
    n_steps = int(np.ceil(T_max / dt - 1e-12))
    times = dt * np.arange(n_steps + 1)
    states = np.empty((n_steps + 1, F.n))
    states[0] = u
    q = None
    k = 0
    settled = 1e-14 * (1.0 + float(np.linalg.norm(u)))
    for k in range(1, n_steps + 1):
        sol = vp_solve(F, u, dt, method=method, warm=q)
        u, q = sol.v, sol.q
        states[k] = u
        if np.linalg.norm(u - f_bar) <= settled:
            states[k:] = f_bar
            break
    return EulerPath(times, states, dt)
