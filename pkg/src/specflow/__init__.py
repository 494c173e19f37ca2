"""Nonlinear spectral decompositions by gradient flows of ``J(u) = ||Au||_1``."""

from .core import (
    CertificateError,
    DimensionError,
    PolyhedralFunctional,
    Signal,
    Subgradient,
    check_certificate,
    evaluate_J,
    membership_in_K,
    nullspace_project,
)
from .equivalence import VPSolution, compare_gf_vp, iss_from_gf, iss_residual_check, taut_string_prox, vp_solve
from .extinction import (
    ExtinctionReport,
    bonforte_figalli_check,
    dual_norm,
    extinction_identities,
    extinction_profile,
    extinction_time,
    ground_state,
    poincare_constant,
)
from .flow import FlowAbort, FlowOptions, Trajectory, evaluate_at, run_event_driven, run_implicit_euler
from .functionals import GridSpec, custom, diag_dominance_report, grid_divergence, l1, linf, tv1d, tv1d_dirichlet
from .minsub import check_minsub, eigenvalue_of, is_eigenvector, min_norm_subgradient
from .spectral import (
    SpectralMeasure,
    band_filter,
    hierarchy_check,
    orthogonality_report,
    reconstruct,
    spectral_measure,
    synthesize_sub0_datum,
    verify_decomposition_condition,
)

__all__ = [
    "CertificateError",
    "DimensionError",
    "ExtinctionReport",
    "FlowAbort",
    "FlowOptions",
    "GridSpec",
    "PolyhedralFunctional",
    "Signal",
    "SpectralMeasure",
    "Subgradient",
    "Trajectory",
    "VPSolution",
    "band_filter",
    "bonforte_figalli_check",
    "check_certificate",
    "check_minsub",
    "compare_gf_vp",
    "custom",
    "diag_dominance_report",
    "dual_norm",
    "eigenvalue_of",
    "evaluate_J",
    "evaluate_at",
    "extinction_identities",
    "extinction_profile",
    "extinction_time",
    "grid_divergence",
    "ground_state",
    "hierarchy_check",
    "is_eigenvector",
    "iss_from_gf",
    "iss_residual_check",
    "l1",
    "linf",
    "membership_in_K",
    "min_norm_subgradient",
    "nullspace_project",
    "orthogonality_report",
    "poincare_constant",
    "reconstruct",
    "run_event_driven",
    "run_implicit_euler",
    "spectral_measure",
    "synthesize_sub0_datum",
    "taut_string_prox",
    "tv1d",
    "tv1d_dirichlet",
    "verify_decomposition_condition",
    "vp_solve",
]

__version__ = "0.1.0"
