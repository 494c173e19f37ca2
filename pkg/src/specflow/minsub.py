"""Minimal-norm subgradients and the eigenvector tests built on them."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import (
    CertificateError,
    PolyhedralFunctional,
    Subgradient,
    as_array,
    check_certificate,
    default_cert_tol,
    evaluate_J,
    membership_in_K,
)
from .qp import QPConvergenceError, solve_box_qp


@dataclass(frozen=True)
class SubgradientOptions:
    eps_z_rel: float = 1e-9  # |z_i| <= eps_z_rel * (1 + |z|_inf) counts as zero
    qp_tol_rel: float = 1e-10
    qp_max_iter: int = 200


DEFAULT_OPTIONS = SubgradientOptions()


@dataclass(frozen=True)
class SignPattern:
    """Partition of the dual coordinates into fixed +1, fixed -1 and free.

    ``signs[i]`` is +1, -1 or 0 (free). For linf the coordinates are the
    entries of ``u`` and the nonzero signs mark the argmax set.
    """

    signs: np.ndarray

    @property
    def fixed_plus(self) -> np.ndarray:
        return np.flatnonzero(self.signs > 0)

    @property
    def fixed_minus(self) -> np.ndarray:
        return np.flatnonzero(self.signs < 0)

    @property
    def free(self) -> np.ndarray:
        return np.flatnonzero(self.signs == 0)

    @property
    def key(self) -> bytes:
        return self.signs.astype(np.int8).tobytes()

    def __eq__(self, other):
        return isinstance(other, SignPattern) and np.array_equal(self.signs, other.signs)

    def __hash__(self):
        return hash(self.key)


def zero_threshold(z: np.ndarray, eps_rel: float) -> float:
    return eps_rel * (1.0 + (float(np.max(np.abs(z))) if z.size else 0.0))


def sign_pattern(F: PolyhedralFunctional, u, eps_z_rel: float = DEFAULT_OPTIONS.eps_z_rel) -> SignPattern:
    u = as_array(u)
    if F.is_linf:
        a = np.abs(u)
        M = float(np.max(a))
        if M == 0.0:
            return SignPattern(np.zeros(F.n, dtype=np.int8))
        tie = a >= M - eps_z_rel * (1.0 + M)
        return SignPattern(np.where(tie, np.sign(u), 0).astype(np.int8))
    z = F.A @ u
    eps = zero_threshold(z, eps_z_rel)
    s = np.zeros(z.shape, dtype=np.int8)
    s[z > eps] = 1
    s[z < -eps] = -1
    return SignPattern(s)


def _linf_subgradient(F, pattern: SignPattern) -> Subgradient:
    k = np.count_nonzero(pattern.signs)
    p = np.zeros(F.n)
    if k:
        p = pattern.signs.astype(float) / k
    return Subgradient(p, p.copy(), 0.0, pattern)


def subgradient_on_pattern(
    F: PolyhedralFunctional,
    pattern: SignPattern,
    opts: SubgradientOptions = DEFAULT_OPTIONS,
    warm: Optional[np.ndarray] = None,
) -> Subgradient:
    """Minimal-norm element of the face ``{A'q : q_i = s_i on fixed, |q_i| <= 1 on free}``."""
    if F.is_linf:
        return _linf_subgradient(F, pattern)
    s = pattern.signs.astype(float)
    free = pattern.signs == 0
    q = s.copy()
    if free.any():
        fixed = ~free
        G = F.gram
        Hff = G[np.ix_(free, free)]
        g = G[np.ix_(free, fixed)] @ s[fixed]
        x0 = None if warm is None else np.clip(warm[free], -1.0, 1.0)
        tol = opts.qp_tol_rel * (1.0 + float(np.linalg.norm(g)))
        try:
            res = solve_box_qp(Hff, g, -1.0, 1.0, x0=x0, tol=tol, max_iter=opts.qp_max_iter)
        except QPConvergenceError as exc:
            raise QPConvergenceError(
                f"minimal-norm subgradient QP hit the iteration cap "
                f"(achieved projected gradient {exc.result.pg_norm:.3e})",
                exc.result,
            ) from None
        q[free] = res.x
    p = F.A.T @ q
    return Subgradient(p, q, 0.0, pattern)


def min_norm_subgradient(F: PolyhedralFunctional, u, opts: SubgradientOptions = DEFAULT_OPTIONS, warm=None) -> Subgradient:
    """The unique element of least norm in the subdifferential of J at ``u``.

    For ``||Au||_1`` this fixes ``q_i = sign((Au)_i)`` on the nonzero
    coordinates and solves the box QP ``min ||A'q||^2`` over the rest. For
    linf it is ``sgn(u) / |argmax set|`` on the argmax set and zero elsewhere.
    """
    pattern = sign_pattern(F, u, opts.eps_z_rel)
    return subgradient_on_pattern(F, pattern, opts, warm)


def is_eigenvector(F: PolyhedralFunctional, sub: Subgradient, tol: float = 1e-8):
    """Whether ``p in dJ(p)`` (eigenvalue 1), via ``J(p) = ||p||^2``.

    ``sub`` must carry a valid certificate that ``p in K``. Returns
    ``(passed, defect)`` with ``defect = J(p) - ||p||^2``.
    """
    if not isinstance(sub, Subgradient):
        raise CertificateError("is_eigenvector needs a certified Subgradient")
    residual = check_certificate(F, sub)
    if residual > default_cert_tol(sub.p):
        raise CertificateError(f"certificate residual {residual:.3e} too large")
    p = sub.p
    nrm2 = float(p @ p)
    defect = evaluate_J(F, p) - nrm2
    return abs(defect) <= tol * max(1.0, nrm2), defect


def _dJ_pairing_range(F: PolyhedralFunctional, pattern: SignPattern, p: np.ndarray):
    """``(inf, sup)`` of ``<p, q>`` over the face of dJ(u) described by ``pattern``."""
    if F.is_linf:
        k = np.count_nonzero(pattern.signs)
        if k == 0:
            # dJ(0) = l1 ball
            m = float(np.max(np.abs(p), initial=0.0))
            return -m, m
        on = pattern.signs != 0
        # q has unit l1 mass on the argmax set with prescribed signs
        v = pattern.signs[on] * p[on]
        return float(np.min(v)), float(np.max(v))
    w = F.A @ p
    s = pattern.signs
    fixed = s != 0
    base = float(s[fixed] @ w[fixed])
    spread = float(np.sum(np.abs(w[~fixed])))
    return base - spread, base + spread


def check_minsub(F: PolyhedralFunctional, u, sub: Subgradient, tol: Optional[float] = None):
    """Test ``<p, p - q> = 0`` for every ``q`` in dJ(u).

    The pairing ``<p, q>`` is affine on the face, so its extremes sit at
    vertices: free dual coordinates take ``-+sign((Ap)_i)``. For the
    minimal-norm ``p`` the lower end always equals ``|p|^2``; the upper end
    is what can fail. Returns ``(passed, violation)`` with ``violation`` the
    largest ``| |p|^2 - <p, q> |`` over the face.
    """
    u = as_array(u)
    p = sub.p
    nrm2 = float(p @ p)
    if tol is None:
        tol = 1e-8 * max(1.0, nrm2)
    pattern = sub.pattern if sub.pattern is not None else sign_pattern(F, u)
    lo, hi = _dJ_pairing_range(F, pattern, p)
    violation = max(abs(nrm2 - lo), abs(hi - nrm2))
    return violation <= tol, violation


def eigenvalue_of(F: PolyhedralFunctional, u, tol: Optional[float] = None):
    """Rayleigh-type quotient ``J(u)/||u||^2`` and whether ``(u, lambda)`` is an eigenpair.

    Returns ``(lam, certified, Subgradient)``.
    """
    u = as_array(u)
    nrm2 = float(u @ u)
    if nrm2 == 0.0:
        raise ValueError("eigenvalue_of needs u != 0")
    lam = evaluate_J(F, u) / nrm2
    member, sub = membership_in_K(F, lam * u, tol)
    return lam, member, sub
