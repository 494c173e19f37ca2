"""JSON/CSV serialization and schema validation for runs, spectra and reports."""

from __future__ import annotations

import csv
import json
import math
from importlib import resources
from pathlib import Path
from typing import Iterable, List

import numpy as np

from .core import PolyhedralFunctional, Signal
from .functionals import from_descriptor, to_descriptor

SCHEMA_NAMES = ("functional", "trajectory", "spectrum", "extinction", "verify")


def _plain(x):
    """numpy -> builtin types; non-finite floats become None (strict JSON)."""
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    return x


def dumps(obj) -> str:
    """Deterministic JSON; floats use the shortest round-trip representation."""
    return json.dumps(_plain(obj), sort_keys=True, indent=1, allow_nan=False) + "\n"


def write_json(path, obj, schema: str = None):
    doc = _plain(obj)
    if schema is not None:
        validate(doc, schema)
    Path(path).write_text(dumps(doc))


def load_schema(name: str) -> dict:
    if name not in SCHEMA_NAMES:
        raise KeyError(f"unknown schema {name!r}")
    return json.loads(resources.files("specflow.schemas").joinpath(f"{name}.schema.json").read_text())


def validate(doc, name: str):
    import jsonschema

    jsonschema.validate(_plain(doc), load_schema(name))


# ---------------------------------------------------------------- documents


def trajectory_to_dict(traj) -> dict:
    return {
        "functional": to_descriptor(traj.functional),
        "breakpoints": traj.breakpoints,
        "states": traj.states,
        "slopes": traj.slopes,
        "certificates": [np.asarray(q) for q in traj.certificates],
        "extinct": traj.extinct,
        "status": traj.status,
        "f_bar": traj.f_bar,
        "segments": [
            {k: v for k, v in s.items() if k in ("t0", "t1", "fallback", "certified", "pattern_iterations",
                                                   "cert_gap", "eigen_ok", "eigen_defect")}
            for s in traj.segments
        ],
    }


def trajectory_from_dict(d: dict):
    from .flow import Trajectory

    F = from_descriptor(d["functional"])
    n = F.n
    return Trajectory(
        F,
        np.asarray(d["breakpoints"], dtype=float),
        np.asarray(d["states"], dtype=float).reshape(-1, n),
        np.asarray(d["slopes"], dtype=float).reshape(-1, n),
        [np.asarray(q, dtype=float) for q in d["certificates"]],
        bool(d["extinct"]),
        np.asarray(d["f_bar"], dtype=float),
        list(d.get("segments", [])),
        d.get("status", "extinct"),
    )


def spectrum_to_dict(measure) -> dict:
    return {
        "source": measure.source,
        "f_bar": measure.f_bar,
        "atoms": [{"lambda": a.lam, "mass": a.mass, "segments": list(a.segments)} for a in measure.atoms],
    }


def spectrum_from_dict(d: dict):
    from .spectral import Atom, SpectralMeasure

    atoms = [Atom(float(a["lambda"]), np.asarray(a["mass"], dtype=float), tuple(a.get("segments", ())))
             for a in d["atoms"]]
    return SpectralMeasure(atoms, np.asarray(d["f_bar"], dtype=float), d.get("source", ""))


def extinction_to_dict(rep) -> dict:
    return {
        "T_star": rep.T_star,
        "dual_norm": rep.dual_norm,
        "poincare_C": rep.poincare_C,
        "poincare_certified": rep.poincare_certified,
        "profile": rep.profile,
        "profile_eigen_defect": rep.profile_eigen_defect,
        "identity_gap": rep.identity_gap,
        "lower_slack": rep.lower_slack,
        "upper_slack": rep.upper_slack,
        "trajectory_C": rep.trajectory_C,
        "certified": rep.certified,
        "checks": rep.checks,
    }


# ---------------------------------------------------------------- CSV


def read_signal_csv(path) -> Signal:
    """One value per row (or one row of values); a non-numeric first row is a header."""
    rows = [r for r in csv.reader(Path(path).read_text().splitlines()) if any(c.strip() for c in r)]
    label = Path(path).stem
    if rows:
        try:
            [float(c) for c in rows[0] if c.strip()]
        except ValueError:
            rows = rows[1:]
    vals: List[float] = []
    for r in rows:
        vals.extend(float(c) for c in r if c.strip())
    return Signal(np.array(vals), label=label)


def write_signal_csv(path, values: Iterable[float], header: str = "value"):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([header])
        for v in np.asarray(values, dtype=float):
            w.writerow([repr(float(v))])


def write_spectrum_csv(path, measure):
    """``lambda, |m|`` per atom, for plotting."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["lambda", "mass_norm"])
        for a in measure.atoms:
            w.writerow([repr(float(a.lam)), repr(float(np.linalg.norm(a.mass)))])


def read_functional_json(path) -> PolyhedralFunctional:
    d = json.loads(Path(path).read_text())
    validate(d, "functional")
    return from_descriptor(d)
