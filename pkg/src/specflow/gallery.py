"""Named fixtures: a functional descriptor plus a datum."""

from __future__ import annotations

from typing import Callable, Dict, Tuple

import numpy as np


def _hat(n: int = 64, mass: float = 3.0):
    # triangular bump on the middle half, scaled so that sum(f) * h = mass with h = 1/n
    k = n // 4
    ramp = np.arange(1, k + 1, dtype=float)
    f = np.zeros(n)
    f[k:2 * k] = ramp
    f[2 * k:3 * k] = ramp[::-1]
    return f * (mass * n / f.sum())


def _random_minsub(seed: int):
    rng = np.random.default_rng(seed)
    return {"type": "grid_div", "nx": 3, "ny": 3}, rng.standard_normal(18)


FIXTURES: Dict[str, Callable[[int], Tuple[dict, np.ndarray]]] = {
    "tv-step4": lambda seed: ({"type": "tv1d", "n": 4}, np.array([1.0, 1.0, -1.0, -1.0])),
    "l1-spike": lambda seed: ({"type": "l1", "n": 3}, np.array([2.0, -1.0, 0.0])),
    "linf-pair": lambda seed: ({"type": "linf", "n": 2}, np.array([3.0, 1.0])),
    "two-scale-step": lambda seed: ({"type": "tv1d", "n": 8}, np.array([3.0, 3, 1, 1, -1, -1, -3, -3])),
    "random-minsub": _random_minsub,
    "bf-hat": lambda seed: ({"type": "tv1d_dirichlet", "n": 64}, _hat()),
}


def gallery(name: str, seed: int = 0):
    """``(descriptor, datum)`` for a named fixture."""
    try:
        make = FIXTURES[name]
    except KeyError:
        raise KeyError(f"unknown gallery fixture {name!r}; available: {', '.join(sorted(FIXTURES))}") from None
    return make(seed)
