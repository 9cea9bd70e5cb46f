"""Desk-scale optimization experiments on categorical students."""

from .fit import (
    CSV_FIELDS,
    InitSpec,
    RunConfig,
    Trajectory,
    TrajectoryRow,
    calibrate_threshold,
    compare_objectives,
    rho_probe,
    run_fit,
    steps_to_threshold,
)
from .io import write_densities, write_trajectory
from .mixture import MixtureConfig, MixtureResult, fit_gaussian, mixture_toy, student_probs

__all__ = [
    "CSV_FIELDS",
    "InitSpec",
    "MixtureConfig",
    "MixtureResult",
    "RunConfig",
    "Trajectory",
    "TrajectoryRow",
    "calibrate_threshold",
    "compare_objectives",
    "fit_gaussian",
    "mixture_toy",
    "rho_probe",
    "run_fit",
    "steps_to_threshold",
    "student_probs",
    "write_densities",
    "write_trajectory",
]
