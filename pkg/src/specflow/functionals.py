"""Builders for the concrete functionals and a diagonal-dominance diagnostic."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import PolyhedralFunctional


@dataclass(frozen=True)
class GridSpec:
    """Cell grid for the staggered divergence.

    The vector field has two unknowns per cell: the flux through its east
    face and the flux through its north face (``2 * nx * ny`` entries, all
    east fluxes first). West and south domain-boundary fluxes are zero.
    Cell ``(ix, iy)`` has linear index ``iy * nx + ix``.
    """

    nx: int
    ny: int

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1:
            raise ValueError("grid needs nx, ny >= 1")

    @property
    def cells(self) -> int:
        return self.nx * self.ny


def tv1d(n: int) -> PolyhedralFunctional:
    """Discrete total variation with forward differences, ``(Au)_i = u_{i+1} - u_i``."""
    if n < 2:
        raise ValueError("tv1d needs n >= 2")
    A = np.zeros((n - 1, n))
    idx = np.arange(n - 1)
    A[idx, idx] = -1.0
    A[idx, idx + 1] = 1.0
    return PolyhedralFunctional(A, "tv1d", n, label=f"tv1d({n})")


def tv1d_dirichlet(n: int) -> PolyhedralFunctional:
    """Total variation of ``u`` extended by zero on both sides (n + 1 jumps).

    This is the finite-grid stand-in for TV on the whole line: the kernel is
    trivial and zero padding stays at zero under the flow.
    """
    if n < 1:
        raise ValueError("tv1d_dirichlet needs n >= 1")
    A = np.zeros((n + 1, n))
    A[np.arange(n), np.arange(n)] = 1.0
    A[np.arange(1, n + 1), np.arange(n)] = -1.0
    return PolyhedralFunctional(A, "custom", n, label=f"tv1d_dirichlet({n})", params={"kind": "tv1d_dirichlet"})


def l1(n: int) -> PolyhedralFunctional:
    if n < 1:
        raise ValueError("l1 needs n >= 1")
    return PolyhedralFunctional(np.eye(n), "l1", n, label=f"l1({n})")


def linf(n: int) -> PolyhedralFunctional:
    if n < 1:
        raise ValueError("linf needs n >= 1")
    return PolyhedralFunctional(None, "linf", n, label=f"linf({n})")


def grid_divergence(g: GridSpec) -> PolyhedralFunctional:
    """``J(u) = sum_cells |div u|`` for a staggered 2D flux field."""
    if not isinstance(g, GridSpec):
        g = GridSpec(*g)
    nx, ny = g.nx, g.ny
    nc = nx * ny
    A = np.zeros((nc, 2 * nc))
    for iy in range(ny):
        for ix in range(nx):
            c = iy * nx + ix
            A[c, c] += 1.0  # east face out
            if ix > 0:
                A[c, c - 1] -= 1.0  # west face = east face of west neighbour
            A[c, nc + c] += 1.0  # north face out
            if iy > 0:
                A[c, nc + c - nx] -= 1.0  # south face = north face of south neighbour
    return PolyhedralFunctional(A, "grid_div", 2 * nc, grid=(nx, ny), label=f"grid_div({nx}x{ny})")


def custom(A, label: str = "custom") -> PolyhedralFunctional:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if not np.all(np.isfinite(A)):
        raise ValueError("operator entries must be finite")
    zero_rows = np.flatnonzero(~np.any(A != 0.0, axis=1))
    if zero_rows.size:
        raise ValueError(f"zero rows in operator (degenerate dual coordinates): {zero_rows.tolist()}")
    return PolyhedralFunctional(A, "custom", A.shape[1], label=label)


def diag_dominance_report(F: PolyhedralFunctional):
    """Weak diagonal dominance of A A'.

    Returns ``(dominant, slack, worst_row)`` where ``slack`` is the minimum
    over rows of ``|d_ii| - sum_{j != i} |d_ij|``.
    """
    if F.is_linf:
        raise TypeError("diagonal dominance is defined for ||Au||_1 functionals only")
    G = np.abs(F.gram)
    diag = np.diag(G)
    off = G.sum(axis=1) - diag
    slack = diag - off
    if slack.size == 0:
        return True, np.inf, -1
    worst = int(np.argmin(slack))
    s = float(slack[worst])
    tol = 1e-12 * (1.0 + float(np.max(diag)))
    return bool(s >= -tol), (0.0 if abs(s) <= tol else s), worst


def from_descriptor(d: dict) -> PolyhedralFunctional:
    """Build a functional from a JSON-style descriptor."""
    kind = d.get("type")
    if kind == "tv1d":
        return tv1d(int(d["n"]))
    if kind == "tv1d_dirichlet":
        return tv1d_dirichlet(int(d["n"]))
    if kind == "l1":
        return l1(int(d["n"]))
    if kind == "linf":
        return linf(int(d["n"]))
    if kind == "grid_div":
        return grid_divergence(GridSpec(int(d["nx"]), int(d["ny"])))
    if kind == "custom":
        m, n = int(d["m"]), int(d["n"])
        A = np.zeros((m, n))
        for i, j, v in d["triplets"]:
            A[int(i), int(j)] += float(v)
        return custom(A, label=d.get("label", "custom"))
    raise ValueError(f"unknown functional type {kind!r}; expected one of tv1d, tv1d_dirichlet, l1, linf, grid_div, custom")


def to_descriptor(F: PolyhedralFunctional) -> dict:
    if F.tag in ("tv1d", "l1", "linf"):
        return {"type": F.tag, "n": F.n}
    if F.tag == "grid_div":
        return {"type": "grid_div", "nx": F.grid[0], "ny": F.grid[1]}
    if F.params.get("kind") == "tv1d_dirichlet":
        return {"type": "tv1d_dirichlet", "n": F.n}
    i, j = np.nonzero(F.A)
    return {
        "type": "custom",
        "m": F.m,
        "n": F.n,
        "triplets": [[int(a), int(b), float(F.A[a, b])] for a, b in zip(i, j)],
    }
