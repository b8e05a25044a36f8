"""Sparse canonical correlation analysis via penalized reduced-rank regression."""

__version__ = "0.1.0"

from .cca import CcaModel, canonical_variates, fit, fit_covariance, fit_low_dim
from .exceptions import (DegenerateSolution, EccarError, InvalidConfig, InvalidData,
                         InvalidPartition, NoViableModel, NumericalFailure, RankTooLarge,
                         SingularCovariance)
from .groups import (GroupPartition, block_partition, elementwise_partition, row_partition,
                     validate_partition)
from .linalg import CovarianceModel, Dataset, empirical_covariances
from .metrics import (procrustes_distance, prediction_mse, sin_theta_distance,
                      stacked_distance, support_metrics, variate_correlation)
from .selection import CvConfig, cross_validate, kfold_split, penalty_grid
from .solver import AdmmConfig, PenaltySpec, admm_fit, kkt_violation, objective, theoretical_penalty
from .synthetic import SyntheticSpec, build_model, sample_dataset

__all__ = [
    "AdmmConfig", "CcaModel", "CovarianceModel", "CvConfig", "Dataset", "DegenerateSolution",
    "EccarError", "GroupPartition", "InvalidConfig", "InvalidData", "InvalidPartition",
    "NoViableModel", "NumericalFailure", "PenaltySpec", "RankTooLarge", "SingularCovariance",
    "SyntheticSpec", "admm_fit", "block_partition", "build_model", "canonical_variates",
    "cross_validate", "elementwise_partition", "empirical_covariances", "fit",
    "fit_covariance", "fit_low_dim", "kfold_split", "kkt_violation", "objective",
    "penalty_grid", "prediction_mse", "procrustes_distance", "row_partition",
    "sample_dataset", "sin_theta_distance", "stacked_distance", "support_metrics",
    "theoretical_penalty", "validate_partition", "variate_correlation",
]
