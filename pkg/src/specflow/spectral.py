"""Spectral measure of a flow, reconstruction, filtering and decomposition checks.

With piecewise-constant slopes the measure ``p(t) dt`` pushed forward through
``lambda(t) = |p(t)|`` is atomic: segment ``k`` contributes mass
``(t_{k+1} - t_k) p_k`` at frequency ``|p_k|``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .core import PolyhedralFunctional, as_array, evaluate_J, membership_in_K
from .minsub import is_eigenvector

MERGE_RTOL = 1e-12


class IncompleteMeasureError(ValueError):
    pass


class SUB0Error(ValueError):
    pass


@dataclass(frozen=True)
class Atom:
    lam: float
    mass: np.ndarray
    segments: Tuple[int, ...] = ()


@dataclass(frozen=True)
class SpectralMeasure:
    atoms: List[Atom]
    f_bar: np.ndarray
    source: str = ""
    f: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def lambdas(self) -> np.ndarray:
        return np.array([a.lam for a in self.atoms])

    @property
    def masses(self) -> np.ndarray:
        n = self.f_bar.size
        return np.array([a.mass for a in self.atoms]).reshape(len(self.atoms), n)


def spectral_measure(traj, source: str = "") -> SpectralMeasure:
    """Atoms ``(|p_k|, (t_{k+1} - t_k) p_k)``, merging segments of equal frequency."""
    if not traj.extinct:
        raise IncompleteMeasureError("trajectory is not extinct; the spectral measure would be incomplete")
    atoms: List[Atom] = []
    b = traj.breakpoints
    for k in range(traj.n_segments):
        p = traj.slopes[k]
        lam = float(np.linalg.norm(p))
        mass = (b[k + 1] - b[k]) * p
        if atoms and abs(atoms[-1].lam - lam) <= MERGE_RTOL * max(lam, atoms[-1].lam):
            prev = atoms[-1]
            atoms[-1] = Atom(prev.lam, prev.mass + mass, prev.segments + (k,))
        else:
            atoms.append(Atom(lam, mass, (k,)))
    return SpectralMeasure(atoms, traj.f_bar.copy(), source, traj.f.copy())


def reconstruct(measure: SpectralMeasure, f=None, rtol: float = 1e-9) -> np.ndarray:
    """``f_bar + sum_k m_k``; checked against the source datum when it is known."""
    out = measure.f_bar.copy()
    for a in measure.atoms:
        out = out + a.mass
    ref = measure.f if f is None else as_array(f)
    if ref is not None:
        err = float(np.linalg.norm(out - ref))
        if err > rtol * (1.0 + float(np.linalg.norm(ref))):
            raise AssertionError(f"reconstruction error {err:.3e} exceeds tolerance")
    return out


def band_filter(measure: SpectralMeasure, lam_lo: float, lam_hi: float = np.inf, include_dc: bool = True) -> np.ndarray:
    """Keep atoms with ``lam_lo <= lambda_k <= lam_hi`` (closed interval)."""
    if lam_lo > lam_hi:
        raise ValueError("empty band: lam_lo > lam_hi")
    out = measure.f_bar.copy() if include_dc else np.zeros_like(measure.f_bar)
    for a in measure.atoms:
        if lam_lo <= a.lam <= lam_hi:
            out = out + a.mass
    return out


def lambda_integral(traj) -> float:
    """``int_0^T |p(t)| dt`` straight from the trajectory."""
    dt = np.diff(traj.breakpoints)
    return float(np.sum(dt * np.linalg.norm(traj.slopes, axis=1)))


def atom_time_mass(measure: SpectralMeasure) -> float:
    """``sum_k |m_k|``; equals :func:`lambda_integral` since merged slopes coincide."""
    return float(sum(np.linalg.norm(a.mass) for a in measure.atoms))


def orthogonality_report(traj):
    """Max ``|<p(t), p(s) - p(r)>|`` over breakpoint triples ``r <= s <= t``.

    Returns ``(max_violation, table)``; the table has one row ``(r, s, t, value)``
    per triple of segment indices.
    """
    P = traj.slopes
    K = P.shape[0]
    G = P @ P.T
    table = []
    worst = 0.0
    for t in range(K):
        for s in range(t + 1):
            for r in range(s + 1):
                v = float(G[t, s] - G[t, r])
                table.append((r, s, t, v))
                worst = max(worst, abs(v))
    return worst, table


def _pairwise_hierarchy(traj, rtol: float):
    F = traj.functional
    P = traj.slopes
    K = P.shape[0]
    J = [evaluate_J(F, P[l]) for l in range(K)]
    failures = []
    for k in range(K):
        member, _ = membership_in_K(F, P[k])
        if not member:
            failures.append(("not_in_K", k, k, float("nan")))
        for l in range(k, K):
            gap = float(P[k] @ P[l]) - J[l]
            if abs(gap) > rtol * (1.0 + J[l]):
                failures.append(("pairing", k, l, gap))
    return failures


def hierarchy_check(traj, rtol: float = 1e-8) -> bool:
    """``p_k in dJ(p_l)`` for every ``k <= l``: ``<p_k, p_l> = J(p_l)`` and ``p_k in K``."""
    return not _pairwise_hierarchy(traj, rtol)


def verify_decomposition_condition(traj, rtol: float = 1e-8, return_failures: bool = False):
    """Hierarchy condition plus reconstruction: the run is a spectral decomposition."""
    failures = _pairwise_hierarchy(traj, rtol) if traj.extinct else [("not_extinct", -1, -1, float("nan"))]
    if traj.extinct:
        m = spectral_measure(traj)
        try:
            reconstruct(m)
        except AssertionError as exc:
            failures.append(("reconstruction", -1, -1, str(exc)))
    ok = not failures
    return (ok, failures) if return_failures else ok


@dataclass(frozen=True)
class SUB0Datum:
    f: np.ndarray
    schedule: np.ndarray  # predicted breakpoints t_j = gamma_j / lambda_j, sorted
    order: Tuple[int, ...]


def synthesize_sub0_datum(F: PolyhedralFunctional, eigenpairs: Sequence[Tuple[object, float, float]],
                          tol: float = 1e-8) -> SUB0Datum:
    """Datum ``f = sum gamma_i u_i`` from eigenpairs meeting (SUB0) + orthogonality.

    Each ``(u_i, lambda_i, gamma_i)`` needs ``p_i = lambda_i u_i`` to be an
    eigenvector, the ``p_i`` pairwise orthogonal, and every suffix sum (in
    order of increasing ``t_i = gamma_i / lambda_i``) inside K.
    """
    if not eigenpairs:
        raise SUB0Error("need at least one eigenpair")
    us, ps, ts = [], [], []
    for i, (u, lam, gamma) in enumerate(eigenpairs):
        u = as_array(u)
        if lam <= 0 or gamma <= 0:
            raise SUB0Error(f"pair {i}: lambda and gamma must be positive")
        p = lam * u
        member, sub = membership_in_K(F, p)
        if not member:
            raise SUB0Error(f"pair {i}: lambda*u is not in K (residual {sub.residual:.3e})")
        ok, defect = is_eigenvector(F, sub, tol)
        if not ok:
            raise SUB0Error(f"pair {i}: lambda*u fails the eigenvector test (defect {defect:.3e})")
        us.append(u)
        ps.append(p)
        ts.append(gamma / lam)
    N = len(ps)
    for i in range(N):
        for j in range(i + 1, N):
            ip = float(ps[i] @ ps[j])
            if abs(ip) > tol * max(1.0, float(ps[i] @ ps[i]), float(ps[j] @ ps[j])):
                raise SUB0Error(f"pairs {i} and {j} are not orthogonal (<p_i, p_j> = {ip:.3e})")
    order = tuple(int(k) for k in np.argsort(ts, kind="stable"))
    for j in range(N):
        idx = order[j:]
        member, sub = membership_in_K(F, np.sum([ps[k] for k in idx], axis=0))
        if not member:
            raise SUB0Error(f"suffix sum over pairs {list(idx)} leaves K (residual {sub.residual:.3e})")
    f = np.sum([g * u for (_, _, g), u in zip(eigenpairs, us)], axis=0)
    return SUB0Datum(f, np.array(sorted(ts)), order)
