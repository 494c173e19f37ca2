"""Signals, polyhedral one-homogeneous functionals and their dual unit ball.

A functional here is ``J(u) = ||A u||_1`` for a real m x n matrix ``A``, or
the max-norm ``J(u) = max_i |u_i|`` which is carried by its own tag because
its dual ball (the l1 ball) is not of the form ``A'[-1, 1]^m`` for small m.

The dual ball is ``K = {A'q : ||q||_inf <= 1}`` and ``J(u) = sup_{p in K} <p, u>``.
A :class:`Subgradient` stores a vector together with the box certificate
``q`` that proves it lies in ``K``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Union

import numpy as np
import scipy.linalg

from .qp import QPConvergenceError, solve_box_qp

STRUCTURE_TAGS = ("tv1d", "l1", "linf", "grid_div", "custom")

EPS_BOX = 1e-12


class DimensionError(ValueError):
    pass


class CertificateError(ValueError):
    pass


@dataclass(frozen=True)
class Signal:
    """A vector in R^n with an optional label and grid metadata."""

    values: np.ndarray
    label: Optional[str] = None
    grid: Optional[dict] = None

    def __post_init__(self):
        v = np.array(self.values, dtype=float).reshape(-1)
        if v.size < 1:
            raise ValueError("a signal needs at least one entry")
        if not np.all(np.isfinite(v)):
            raise ValueError("signal entries must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.size

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    def __len__(self):
        return self.n


ArrayLike = Union[Signal, np.ndarray, list, tuple]


def as_array(x: ArrayLike) -> np.ndarray:
    if isinstance(x, Signal):
        return np.array(x.values)
    return np.asarray(x, dtype=float).reshape(-1)


@dataclass(frozen=True, eq=False)
class PolyhedralFunctional:
    """``J(u) = ||A u||_1`` (or the max-norm for ``tag == "linf"``).

    ``A`` is stored dense; desk-scale problems only.
    """

    A: Optional[np.ndarray]
    tag: str
    n: int
    grid: Optional[tuple] = None
    label: str = ""
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.tag not in STRUCTURE_TAGS:
            raise ValueError(f"unknown structure tag {self.tag!r}")
        if self.tag == "linf":
            if self.A is not None:
                raise ValueError("linf carries no operator")
        else:
            A = np.array(self.A, dtype=float)
            if A.ndim != 2 or A.shape[1] != self.n:
                raise DimensionError(f"operator shape {A.shape} does not act on R^{self.n}")
            if not np.all(np.isfinite(A)):
                raise ValueError("operator entries must be finite")
            A.setflags(write=False)
            object.__setattr__(self, "A", A)

    @property
    def is_linf(self) -> bool:
        return self.tag == "linf"

    @property
    def m(self) -> int:
        """Number of dual coordinates (rows of A; n for linf)."""
        return self.n if self.is_linf else self.A.shape[0]

    @cached_property
    def gram(self) -> np.ndarray:
        """A A' (m x m)."""
        if self.is_linf:
            raise TypeError("linf has no Gram matrix")
        G = self.A @ self.A.T
        G.setflags(write=False)
        return G

    @cached_property
    def kernel_basis(self) -> np.ndarray:
        """Orthonormal basis of N(J) = ker(A) as columns (n x k)."""
        if self.is_linf:
            return np.zeros((self.n, 0))
        if self.A.shape[0] == 0:
            return np.eye(self.n)
        B = scipy.linalg.null_space(self.A, rcond=1e-12)
        B.setflags(write=False)
        return B

    @cached_property
    def range_basis(self) -> np.ndarray:
        """Orthonormal basis of N(J)^perp = range(A') as columns."""
        if self.is_linf:
            return np.eye(self.n)
        B = scipy.linalg.orth(self.A.T, rcond=1e-12)
        B.setflags(write=False)
        return B

    @cached_property
    def full_row_rank(self) -> bool:
        return (not self.is_linf) and self.range_basis.shape[1] == self.m

    @cached_property
    def op_norm(self) -> float:
        """Spectral norm of A (1 for linf, by convention unused)."""
        if self.is_linf:
            return 1.0
        return float(np.linalg.norm(self.A, 2)) if self.A.size else 0.0

    def __call__(self, u: ArrayLike) -> float:
        return evaluate_J(self, u)

    def descriptor(self) -> dict:
        from .functionals import to_descriptor

        return to_descriptor(self)


@dataclass(frozen=True)
class Subgradient:
    """An element ``p`` of K with its box certificate ``q`` (``p ~= A'q``)."""

    p: np.ndarray
    q: np.ndarray
    residual: float = 0.0
    pattern: Optional[object] = None

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.p))


def _check_dim(F: PolyhedralFunctional, u: np.ndarray):
    if u.shape[0] != F.n:
        raise DimensionError(f"signal of length {u.shape[0]} for functional on R^{F.n}")


def evaluate_J(F: PolyhedralFunctional, u: ArrayLike) -> float:
    """Value of the functional at ``u``."""
    u = as_array(u)
    _check_dim(F, u)
    if F.is_linf:
        return float(np.max(np.abs(u)))
    return float(np.sum(np.abs(F.A @ u)))


def nullspace_project(F: PolyhedralFunctional, f: ArrayLike) -> np.ndarray:
    """Orthogonal projection of ``f`` onto ker(A)."""
    f = as_array(f)
    _check_dim(F, f)
    B = F.kernel_basis
    if B.shape[1] == 0:
        return np.zeros_like(f)
    return B @ (B.T @ f)


def default_cert_tol(p: np.ndarray) -> float:
    return 1e-9 * (1.0 + float(np.linalg.norm(p)))


def membership_in_K(F: PolyhedralFunctional, p: ArrayLike, tol: Optional[float] = None):
    """Test ``p in K`` by solving ``min_{|q|_inf <= 1} ||A'q - p||^2``.

    Returns ``(is_member, Subgradient)``; the subgradient carries the
    minimizing certificate and the achieved residual. Solver failure raises
    :class:`~specflow.qp.QPConvergenceError` rather than returning False.
    """
    p = as_array(p)
    _check_dim(F, p)
    if tol is None:
        tol = default_cert_tol(p)
    if F.is_linf:
        # K is the l1 ball; p is its own certificate
        excess = max(float(np.sum(np.abs(p))) - 1.0, 0.0)
        return excess <= tol, Subgradient(p.copy(), p.copy(), excess)
    if F.m == 0:
        res = float(np.linalg.norm(p))
        return res <= tol, Subgradient(p.copy(), np.zeros(0), res)
    g = -(F.A @ p)
    qp = solve_box_qp(F.gram, g, -1.0, 1.0, tol=1e-13 * (1.0 + np.linalg.norm(g)), raise_on_fail=False)
    q = qp.x
    res = float(np.linalg.norm(F.A.T @ q - p))
    if not qp.converged and res > tol:
        raise QPConvergenceError(
            f"membership test inconclusive: residual {res:.3e}, projected gradient {qp.pg_norm:.3e}",
            qp,
        )
    return res <= tol, Subgradient(p.copy(), q, res)


def check_certificate(F: PolyhedralFunctional, sub: Subgradient, tol: Optional[float] = None) -> float:
    """Return the certificate residual ``||A'q - p||``; raise if ``q`` is out of the box."""
    if sub.q is None:
        raise CertificateError("subgradient has no certificate")
    if F.is_linf:
        excess = float(np.sum(np.abs(sub.p))) - 1.0
        if excess > (tol if tol is not None else default_cert_tol(sub.p)):
            raise CertificateError(f"l1 norm exceeds 1 by {excess:.3e}")
        return max(excess, 0.0)
    q = np.asarray(sub.q, dtype=float)
    if q.shape != (F.m,):
        raise CertificateError(f"certificate has shape {q.shape}, expected ({F.m},)")
    if np.max(np.abs(q), initial=0.0) > 1.0 + EPS_BOX:
        raise CertificateError(f"certificate leaves the box: |q|_inf = {np.max(np.abs(q)):.17g}")
    return float(np.linalg.norm(F.A.T @ q - sub.p))
