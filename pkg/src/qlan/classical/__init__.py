"""Finite-sample-space classical experiments."""

from qlan.classical.convergence import ConvergenceTable, fit_loglog_slope, weak_convergence_report
from qlan.classical.deficiency import DeficiencyResult, deficiency_lp, le_cam_distance
from qlan.classical.experiments import (
    CanonicalMeasure,
    ClassicalExperiment,
    ProductExperiment,
    binomial_experiment,
    binomial_hellinger,
    canonical_measure,
    classical_characteristic,
    gaussian_shift_characteristic,
    gaussian_shift_hellinger,
    hellinger_distance,
    hellinger_transform,
    poisson_experiment,
    poisson_limit_hellinger,
    simplex_point,
)
from qlan.classical.families import LocalClassicalFamily, softmax_family

__all__ = [
    "CanonicalMeasure",
    "ClassicalExperiment",
    "ConvergenceTable",
    "DeficiencyResult",
    "LocalClassicalFamily",
    "ProductExperiment",
    "binomial_experiment",
    "binomial_hellinger",
    "canonical_measure",
    "classical_characteristic",
    "deficiency_lp",
    "fit_loglog_slope",
    "gaussian_shift_characteristic",
    "gaussian_shift_hellinger",
    "hellinger_distance",
    "hellinger_transform",
    "le_cam_distance",
    "poisson_experiment",
    "poisson_limit_hellinger",
    "simplex_point",
    "softmax_family",
    "weak_convergence_report",
]
