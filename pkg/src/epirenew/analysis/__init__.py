"""Intervention study pipelines: lag scans, two-stage regression and mediation."""

from .lagscan import LagFit, LagScanResult, LagSkipped, lag_scan_regression
from .linear import LinearFit, LinearGaussianModel, fit_linear
from .mediation import (
    PAIRING_CAVEAT,
    MediationResult,
    MediationSettings,
    MediatorNotIdentified,
    mediation,
)
from .synthetic import (
    NPI_NAMES,
    SyntheticEpidemic,
    case_observation,
    default_case_delay,
    default_death_delay,
    default_generation,
    lockdown_epidemic,
    mediation_epidemic,
    npi_mobility_epidemic,
    simulate_regions,
)
from .twostage import (
    STAGE2_NOTE,
    Stage1NotConverged,
    Stage1Settings,
    Stage2Fit,
    TwoStageResult,
    default_variants,
    fit_stage1,
    stage2,
    two_stage,
)

__all__ = [
    "LagFit",
    "LagScanResult",
    "LagSkipped",
    "LinearFit",
    "LinearGaussianModel",
    "MediationResult",
    "MediationSettings",
    "MediatorNotIdentified",
    "NPI_NAMES",
    "PAIRING_CAVEAT",
    "STAGE2_NOTE",
    "Stage1NotConverged",
    "Stage1Settings",
    "Stage2Fit",
    "SyntheticEpidemic",
    "TwoStageResult",
    "case_observation",
    "default_case_delay",
    "default_death_delay",
    "default_generation",
    "default_variants",
    "fit_linear",
    "fit_stage1",
    "lag_scan_regression",
    "lockdown_epidemic",
    "mediation",
    "mediation_epidemic",
    "npi_mobility_epidemic",
    "simulate_regions",
    "stage2",
    "two_stage",
]
