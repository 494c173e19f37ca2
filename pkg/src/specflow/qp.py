"""Box-constrained convex quadratic programs.

Solves

    minimize  0.5 x'Hx + g'x   subject to  lo <= x <= hi

with H symmetric positive semidefinite. Every subgradient, membership and
prox computation in the package funnels through this solver, so it is tuned
for small dense problems where the exact active face matters: a projected
Newton iteration (Bertsekas) that solves the reduced system exactly on the
free variables, with an accelerated projected-gradient phase as a fallback
when Newton stalls.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class QPConvergenceError(RuntimeError):
    """Raised when the iteration cap is hit before the optimality test passes."""

    def __init__(self, message, result):
        super().__init__(message)
        self.result = result


@dataclass(frozen=True)
class QPResult:
    x: np.ndarray
    objective: float
    pg_norm: float  # inf-norm of the projected gradient
    iterations: int
    converged: bool


def _objective(H, g, x):
    return 0.5 * x @ (H @ x) + g @ x


def _projected_gradient(x, grad, lo, hi):
    return x - np.clip(x - grad, lo, hi)


def _reduced_solve(Hff, rhs):
    # Cholesky when safely positive definite, least squares otherwise
    try:
        c = np.linalg.cholesky(Hff)
        if np.min(np.abs(np.diag(c))) ** 2 > 1e-10 * np.max(np.abs(np.diag(Hff))):
            return np.linalg.solve(Hff, rhs)
    except np.linalg.LinAlgError:
        pass
    return np.linalg.lstsq(Hff, rhs, rcond=1e-12)[0]


def _power_iteration(H, iters=50, seed=0):
    n = H.shape[0]
    v = np.random.default_rng(seed).standard_normal(n)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iters):
        w = H @ v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        lam = v @ w
        v = w / nw
    return max(lam, np.linalg.norm(H @ v))


def _apg(H, g, lo, hi, x, tol, max_iter):
    """Accelerated projected gradient with step 1/L (FISTA with restart)."""
    L = _power_iteration(H) * 1.01 + 1e-300
    y = x.copy()
    t = 1.0
    for k in range(max_iter):
        grad_y = H @ y + g
        x_new = np.clip(y - grad_y / L, lo, hi)
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        # gradient-based adaptive restart
        if (y - x_new) @ (x_new - x) > 0:
            t_new = 1.0
            y = x_new
        else:
            y = x_new + ((t - 1.0) / t_new) * (x_new - x)
        x, t = x_new, t_new
        if k % 10 == 0:
            pg = _projected_gradient(x, H @ x + g, lo, hi)
            if np.max(np.abs(pg), initial=0.0) <= tol:
                break
    return x


def _polish(H, g, lo, hi, x):
    """Re-solve exactly on the face identified by x; keep it only if it is better."""
    grad = H @ x + g
    at_lo = (x <= lo) & (grad >= 0)
    at_hi = (x >= hi) & (grad <= 0)
    free = ~(at_lo | at_hi)
    if not free.any():
        return x
    y = x.copy()
    y[at_lo] = lo[at_lo]
    y[at_hi] = hi[at_hi]
    fixed = ~free
    rhs = -(g[free] + H[np.ix_(free, fixed)] @ y[fixed])
    y[free] = _reduced_solve(H[np.ix_(free, free)], rhs)
    if np.any(y < lo - 1e-12) or np.any(y > hi + 1e-12):
        return x
    y = np.clip(y, lo, hi)
    if _objective(H, g, y) <= _objective(H, g, x) + 1e-15 * (1.0 + abs(_objective(H, g, x))):
        return y
    return x


def solve_box_qp(H, g, lo, hi, x0=None, tol=1e-12, max_iter=200, raise_on_fail=True):
    """Minimize ``0.5 x'Hx + g'x`` over the box ``[lo, hi]``.

    Parameters
    ----------
    H : (k, k) array, symmetric positive semidefinite.
    g : (k,) array.
    lo, hi : scalars or (k,) arrays with ``lo <= hi``.
    x0 : optional warm start; clipped into the box.
    tol : stopping threshold on the inf-norm of the projected gradient.
    max_iter : cap on projected-Newton iterations.

    Returns
    -------
    QPResult. Raises QPConvergenceError on cap unless ``raise_on_fail`` is False.
    """
    H = np.asarray(H, dtype=float)
    g = np.asarray(g, dtype=float)
    k = g.shape[0]
    lo = np.broadcast_to(np.asarray(lo, dtype=float), (k,)).copy()
    hi = np.broadcast_to(np.asarray(hi, dtype=float), (k,)).copy()
    if k == 0:
        return QPResult(np.zeros(0), 0.0, 0.0, 0, True)
    x = np.zeros(k) if x0 is None else np.asarray(x0, dtype=float).copy()
    x = np.clip(x, lo, hi)

    value = _objective(H, g, x)
    stalled = 0
    it = 0
    pg_norm = np.inf
    for it in range(1, max_iter + 1):
        grad = H @ x + g
        pg = _projected_gradient(x, grad, lo, hi)
        pg_norm = np.max(np.abs(pg))
        if pg_norm <= tol:
            break
        # epsilon-active set: near a bound and pushed outward
        eps = min(1e-9, pg_norm)
        binding = ((x <= lo + eps) & (grad > 0)) | ((x >= hi - eps) & (grad < 0))
        free = ~binding
        d = np.zeros(k)
        d[binding] = -grad[binding]
        if free.any():
            d[free] = _reduced_solve(H[np.ix_(free, free)], -grad[free])
        alpha = 1.0
        accepted = False
        while alpha > 1e-20:
            x_new = np.clip(x + alpha * d, lo, hi)
            v_new = _objective(H, g, x_new)
            if v_new <= value + 1e-4 * (grad @ (x_new - x)):
                accepted = True
                break
            alpha *= 0.5
        if not accepted or v_new >= value:
            stalled += 1
            x = _apg(H, g, lo, hi, x, tol, 2000)
            value = _objective(H, g, x)
            if stalled > 3:
                grad = H @ x + g
                pg_norm = np.max(np.abs(_projected_gradient(x, grad, lo, hi)))
                break
            continue
        x, value = x_new, v_new
    x = _polish(H, g, lo, hi, x)
    grad = H @ x + g
    pg_norm = np.max(np.abs(_projected_gradient(x, grad, lo, hi)))
    res = QPResult(x, float(_objective(H, g, x)), float(pg_norm), it, bool(pg_norm <= tol))
    if not res.converged and raise_on_fail:
        raise QPConvergenceError(
            f"box QP did not converge in {max_iter} iterations "
            f"(projected gradient {pg_norm:.3e} > {tol:.3e})",
            res,
        )
    return res


def box_least_squares(C, d, lo, hi, x0=None, tol=None, max_iter=200, raise_on_fail=True):
    """Minimize ``||C x - d||^2`` over the box, via :func:`solve_box_qp`."""
    C = np.asarray(C, dtype=float)
    d = np.asarray(d, dtype=float)
    H = C.T @ C
    g = -(C.T @ d)
    if tol is None:
        tol = 1e-12 * (1.0 + np.linalg.norm(g))
    return solve_box_qp(H, g, lo, hi, x0=x0, tol=tol, max_iter=max_iter, raise_on_fail=raise_on_fail)
