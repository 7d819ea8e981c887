"""Stability radii and sector-bound certification for positive feedback loops."""

from .errors import LureStabError
from .linalg import (
    NormKind,
    SpectralResult,
    elementwise_abs,
    elementwise_leq,
    inverse,
    is_hurwitz,
    is_metzler,
    is_nonnegative,
    metzler_hurwitz_certificate,
    operator_norm,
    spectral_abscissa,
    spectral_radius,
)
from .radius import (
    AizermanCertificate,
    LtiSystem,
    PerturbationStructure,
    RadiusReport,
    SectorBound,
    certify_positive_lure,
    closed_loop_matrix,
    monotonicity_gap,
    nn_stability_radius,
    refine_upper_sector,
    stability_radius_linear,
    stability_radius_lure,
    stability_radius_schur,
)
from .ffnn import (
    ActivationSpec,
    Ffnn,
    Layer,
    empirical_sector_check,
    ffnn_eval,
    load_ffnn,
    sector_bound_ffnn,
    select_refined_sign,
)
from .sim import (
    BUILTIN_NONLINEARITIES,
    Nonlinearity,
    SimConfig,
    StabilityVerdict,
    Trajectory,
    classify_stability,
    find_critical_delta,
    simulate_lure,
    sweep,
)

__version__ = "0.1.0"

__all__ = [
    "ActivationSpec",
    "AizermanCertificate",
    "BUILTIN_NONLINEARITIES",
    "Ffnn",
    "Layer",
    "LtiSystem",
    "LureStabError",
    "NormKind",
    "Nonlinearity",
    "PerturbationStructure",
    "RadiusReport",
    "SectorBound",
    "SimConfig",
    "SpectralResult",
    "StabilityVerdict",
    "Trajectory",
    "certify_positive_lure",
    "classify_stability",
    "closed_loop_matrix",
    "elementwise_abs",
    "elementwise_leq",
    "empirical_sector_check",
    "ffnn_eval",
    "find_critical_delta",
    "inverse",
    "is_hurwitz",
    "is_metzler",
    "is_nonnegative",
    "load_ffnn",
    "metzler_hurwitz_certificate",
    "monotonicity_gap",
    "nn_stability_radius",
    "operator_norm",
    "refine_upper_sector",
    "sector_bound_ffnn",
    "select_refined_sign",
    "simulate_lure",
    "spectral_abscissa",
    "spectral_radius",
    "stability_radius_linear",
    "stability_radius_lure",
    "stability_radius_schur",
    "sweep",
]
