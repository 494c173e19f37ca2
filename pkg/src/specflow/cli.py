"""Command-line front end: decompose, verify, extinction, filter, gallery.

Exit codes: 0 ok, 1 usage error, 2 numerical abort, 3 verification failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np

from . import io
from .core import PolyhedralFunctional, as_array, nullspace_project
from .flow import FlowAbort, FlowOptions, dissipation_report, run_event_driven
from .qp import QPConvergenceError

log = logging.getLogger("specflow")

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_VERIFY = 0, 1, 2, 3
COMMANDS = ("decompose", "verify", "extinction", "filter", "gallery")


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    command: str
    functional: Optional[str] = None
    inputs: Tuple[str, ...] = ()
    out: str = "."
    band: Optional[Tuple[float, float]] = None
    tol: float = 1e-8
    workers: int = 1
    seed: int = 0
    name: Optional[str] = None
    include_dc: bool = True

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise UsageError(f"unknown command {self.command!r}")
        if not self.tol > 0:
            raise UsageError("--tol must be positive")
        if self.workers < 1:
            raise UsageError("--workers must be >= 1")


# ---------------------------------------------------------------- verification


def minsub_expected(F: PolyhedralFunctional) -> bool:
    """Structures for which the flow is guaranteed to emit eigenvectors."""
    from .functionals import diag_dominance_report

    if F.tag in ("tv1d", "l1", "linf", "grid_div"):
        return True
    return bool(diag_dominance_report(F)[0])


def _check(name, asserted, passed, defect=None, note=""):
    d = {"name": name, "asserted": bool(asserted), "passed": bool(passed)}
    if defect is not None:
        d["defect"] = float(defect)
    if note:
        d["note"] = note
    return d


def verification_report(F: PolyhedralFunctional, f, traj, tol: float = 1e-8) -> dict:
    """Pass/fail per theorem with measured defects; only hypotheses that hold are asserted."""
    from .equivalence import compare_gf_vp, iss_from_gf, iss_residual_check
    from .extinction import extinction_identities
    from .minsub import check_minsub, is_eigenvector, min_norm_subgradient
    from .spectral import orthogonality_report, spectral_measure, verify_decomposition_condition

    f = as_array(f)
    checks = []
    expect = minsub_expected(F)
    K = traj.n_segments
    b = traj.breakpoints

    eig = [is_eigenvector(F, traj.subgradient(k), tol) for k in range(K)]
    eig_ok = all(ok for ok, _ in eig)
    worst = max((abs(d) for _, d in eig), default=0.0)
    checks.append(_check("segment_eigenvectors", expect, eig_ok, worst,
                         "" if expect else "no MINSUB guarantee for this operator; reported only"))

    ms_ok, ms_worst = True, 0.0
    for k in range(K):
        um = traj.states[k] - 0.5 * (b[k + 1] - b[k]) * traj.slopes[k]
        sub = min_norm_subgradient(F, um)
        ok, viol = check_minsub(F, um, sub)
        ms_ok &= ok
        ms_worst = max(ms_worst, abs(viol))
    checks.append(_check("minsub_midpoints", expect, ms_ok, ms_worst))

    diss = dissipation_report(traj, rtol=tol)
    checks.append(_check("dissipation", True, all(r["ok"] for r in diss),
                         max((r["rel_error"] for r in diss), default=0.0)))

    mass = max(float(np.linalg.norm(nullspace_project(F, u) - traj.f_bar)) for u in traj.states)
    checks.append(_check("mass_conservation", True, mass <= 1e-9 * (1.0 + np.linalg.norm(f)), mass))

    if not traj.extinct:
        checks.append(_check("extinction", True, False, note=f"status {traj.status}"))
        return {"passed": False, "checks": checks}

    m = spectral_measure(traj)
    rec_err = float(np.linalg.norm(m.f_bar + sum((a.mass for a in m.atoms), np.zeros(F.n)) - f))
    checks.append(_check("reconstruction", True, rec_err <= 1e-9 * (1.0 + np.linalg.norm(f)), rec_err))

    pmax = max((float(p @ p) for p in traj.slopes), default=0.0)
    orth, _ = orthogonality_report(traj)
    checks.append(_check("orthogonality", eig_ok, orth <= tol * max(pmax, 1e-300) or orth == 0.0, orth))

    decomp, failures = verify_decomposition_condition(traj, rtol=tol, return_failures=True)
    checks.append(_check("hierarchy", eig_ok, decomp, None, "" if decomp else f"{len(failures)} failing pairs"))

    T = traj.T
    if T > 0:
        ts = T * (np.arange(1, 11) - 0.5) / 10.0
        dev = compare_gf_vp(F, f, ts, traj)
        checks.append(_check("gf_equals_vp", decomp, dev <= 1e-6 * (1.0 + np.linalg.norm(f)), dev))
        taus = (1.0 / T) * np.geomspace(0.3, 30.0, 20)
        iss_ok = all(iss_residual_check(F, *iss_from_gf(traj, tau), tol=tol) for tau in taus)
        checks.append(_check("iss_residuals", decomp, iss_ok))

    rep = extinction_identities(F, f, traj, tol=max(tol, 1e-7))
    for key, ok in rep.checks.items():
        if key == "degenerate":
            continue
        asserted = key in ("lower_bound", "upper_bound") or decomp
        if key == "profile_eigenvector":
            asserted = expect
        checks.append(_check(f"extinction_{key}", asserted, ok))

    passed = all(c["passed"] for c in checks if c["asserted"])
    return {"passed": passed, "checks": checks}


# ---------------------------------------------------------------- commands


def _load(cfg: RunConfig, path: str):
    if cfg.functional is None:
        raise UsageError("--functional is required")
    try:
        F = io.read_functional_json(cfg.functional)
    except (OSError, ValueError, KeyError) as exc:
        raise UsageError(f"cannot read functional {cfg.functional}: {exc}") from None
    except Exception as exc:  # jsonschema.ValidationError
        raise UsageError(f"invalid functional descriptor {cfg.functional}: {getattr(exc, 'message', exc)}") from None
    try:
        f = io.read_signal_csv(path)
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read input {path}: {exc}") from None
    if f.n != F.n:
        raise UsageError(f"input {path} has {f.n} entries; functional acts on R^{F.n}")
    return F, f


def _outdir(cfg: RunConfig, path: str) -> Path:
    out = Path(cfg.out)
    if len(cfg.inputs) > 1:
        out = out / Path(path).stem
    out.mkdir(parents=True, exist_ok=True)
    return out


def _run_one(cfg: RunConfig, path: str) -> int:
    from .extinction import GroundStateOptions, extinction_identities
    from .spectral import band_filter, spectral_measure

    F, f = _load(cfg, path)
    out = _outdir(cfg, path)
    try:
        traj = run_event_driven(F, f, FlowOptions(verify_each_segment=cfg.command == "verify"))
    except FlowAbort as exc:
        log.error("%s: %s", path, exc)
        io.write_json(out / "trajectory.json", io.trajectory_to_dict(exc.trajectory), "trajectory")
        return EXIT_NUMERIC

    if cfg.command == "decompose":
        io.write_json(out / "trajectory.json", io.trajectory_to_dict(traj), "trajectory")
        m = spectral_measure(traj, source=Path(path).stem)
        io.write_json(out / "spectrum.json", io.spectrum_to_dict(m), "spectrum")
        io.write_spectrum_csv(out / "spectrum.csv", m)
        return EXIT_OK
    if cfg.command == "verify":
        rep = verification_report(F, f, traj, cfg.tol)
        rep["input"] = str(path)
        io.write_json(out / "verify.json", rep, "verify")
        for c in rep["checks"]:
            mark = "PASS" if c["passed"] else ("FAIL" if c["asserted"] else "info")
            log.info("%-32s %s %s", c["name"], mark, "" if "defect" not in c else f"{c['defect']:.3e}")
        return EXIT_OK if rep["passed"] else EXIT_VERIFY
    if cfg.command == "extinction":
        rep = extinction_identities(F, f, traj, tol=max(cfg.tol, 1e-7), gs_opts=GroundStateOptions(seed=cfg.seed))
        io.write_json(out / "extinction.json", io.extinction_to_dict(rep), "extinction")
        print(f"{path}: |f|_* = {rep.dual_norm:.12g} <= T* = {rep.T_star:.12g} "
              f"<= C|f - f_bar| = {rep.poincare_C * np.linalg.norm(f.values - traj.f_bar):.12g}"
              f"   (C = {rep.poincare_C:.12g}{'' if rep.poincare_certified else ', best found'})")
        return EXIT_OK
    if cfg.command == "filter":
        if cfg.band is None:
            raise UsageError("filter needs --band lo,hi")
        m = spectral_measure(traj, source=Path(path).stem)
        io.write_signal_csv(out / "filtered.csv", band_filter(m, *cfg.band, include_dc=cfg.include_dc))
        return EXIT_OK
    raise UsageError(f"unhandled command {cfg.command}")


def _run_safe(cfg: RunConfig, path: str) -> Tuple[int, str]:
    try:
        return _run_one(cfg, path), ""
    except UsageError as exc:
        return EXIT_USAGE, str(exc)
    except (QPConvergenceError, FlowAbort, np.linalg.LinAlgError) as exc:
        return EXIT_NUMERIC, f"{path}: numerical abort: {exc}"


def cmd_gallery(cfg: RunConfig) -> int:
    from .gallery import gallery

    if not cfg.name:
        raise UsageError("gallery needs a fixture name")
    try:
        desc, f = gallery(cfg.name, cfg.seed)
    except KeyError as exc:
        raise UsageError(exc.args[0]) from None
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    io.write_json(out / "functional.json", desc, "functional")
    io.write_signal_csv(out / f"{cfg.name}.csv", f)
    print(f"wrote {out / 'functional.json'} and {out / (cfg.name + '.csv')}")
    return EXIT_OK


def run(cfg: RunConfig) -> int:
    if cfg.command == "gallery":
        return cmd_gallery(cfg)
    if not cfg.inputs:
        raise UsageError("--input is required")
    if cfg.workers > 1 and len(cfg.inputs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as ex:
            results = list(ex.map(_run_safe, [cfg] * len(cfg.inputs), cfg.inputs))
    else:
        results = [_run_safe(cfg, p) for p in cfg.inputs]
    for code, msg in results:
        if msg:
            log.error("%s", msg)
    codes = [c for c, _ in results]
    if EXIT_USAGE in codes:
        return EXIT_USAGE
    return max(codes)


# ---------------------------------------------------------------- argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _band(s: str):
    try:
        lo, hi = (float(x) for x in s.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("--band expects lo,hi") from None
    return lo, hi


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="specflow", description="Spectral decompositions by one-homogeneous gradient flows.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("name", nargs="?", help="fixture name (gallery only)")
    p.add_argument("--functional", help="functional descriptor JSON")
    p.add_argument("--input", nargs="+", default=[], help="datum CSV file(s); several files run as a batch")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--band", type=_band, help="lo,hi frequency band (filter)")
    p.add_argument("--no-dc", action="store_true", help="drop the null-space component when filtering")
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    level = getattr(logging, os.environ.get("SPECFLOW_LOG", "WARNING").upper(), None)
    logging.basicConfig(level=level if isinstance(level, int) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig(args.command, args.functional, tuple(args.input), args.out, args.band, args.tol,
                        args.workers, args.seed, args.name, not args.no_dc)
        return run(cfg)
    except UsageError as exc:
        print(f"specflow: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
