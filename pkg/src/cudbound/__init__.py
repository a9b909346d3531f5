"""Confidence sets for the generalization error of small-sample classifiers.

The central construction is the CUD (constrained uniform deviation) bound:
an interval centred at the training error whose half-width is a bootstrap
quantile of a damped supremum of error deviations, computed exactly by
branch-and-bound. Six classical competitors and a Monte-Carlo coverage
harness are included.
"""

__version__ = "0.1.0"

from .baselines import (
    BaselineConfig,
    BaselineInterval,
    PointEstimate632,
    beta_quantile,
    ci_bayes_martin,
    ci_corrected_bootstrap,
    ci_cv_normal_yang,
    ci_inverted_binomial_langford,
    ci_normal_kohavi,
    ci_quantile_bootstrap,
    effective_sample_size,
    estimate_632,
)
from .bootstrap import Multiplicities, deviation, draw_multiplicities, off_support
from .cud import CUDInterval, CudConfig, brute_force_q, cud_interval, g, q_replicate
from .dataset import Dataset, SimSpec, generate_simulated, load_csv, split, write_csv
from .harness import CoverageReport, ExperimentConfig, kurtosis, run_coverage_experiment, run_repetition
from .interval import ConfidenceInterval
from .model import BasisExpansion, LeastSquaresClassifier, empirical_error, expand, fit_least_squares, surrogate_loss
from .region_opt import SignConstraints, interior_direction, min_loss_over_cone, strictly_feasible_point

__all__ = [
    "BaselineConfig",
    "BaselineInterval",
    "BasisExpansion",
    "CUDInterval",
    "ConfidenceInterval",
    "CoverageReport",
    "CudConfig",
    "Dataset",
    "ExperimentConfig",
    "LeastSquaresClassifier",
    "Multiplicities",
    "PointEstimate632",
    "SignConstraints",
    "SimSpec",
    "beta_quantile",
    "brute_force_q",
    "ci_bayes_martin",
    "ci_corrected_bootstrap",
    "ci_cv_normal_yang",
    "ci_inverted_binomial_langford",
    "ci_normal_kohavi",
    "ci_quantile_bootstrap",
    "cud_interval",
    "deviation",
    "draw_multiplicities",
    "effective_sample_size",
    "empirical_error",
    "estimate_632",
    "expand",
    "fit_least_squares",
    "g",
    "generate_simulated",
    "interior_direction",
    "kurtosis",
    "load_csv",
    "min_loss_over_cone",
    "off_support",
    "q_replicate",
    "run_coverage_experiment",
    "run_repetition",
    "split",
    "strictly_feasible_point",
    "surrogate_loss",
    "write_csv",
]
