"""Covariance estimation for a target subset of variables under an
approximate factor model, with weighted principal-component factor
extraction, adaptive-thresholding sparse idiosyncratic estimation, a
parallel divide-and-conquer variant, and a Monte-Carlo harness.
"""

from .data import (
    FactorModelEstimate,
    ObservationMatrix,
    SubsetSelector,
    TrueModel,
    load_panel_csv,
    restrict,
    validate,
)
from .divide_conquer import (
    Partition,
    align_factors,
    dc_estimate,
    partition_variables,
)
from .metrics import (
    ErrorReport,
    FisherReport,
    check_model_conditions,
    component_error,
    factor_error,
    fisher_dominance,
    fisher_dominance_expected,
    inv_operator_norm_diff,
    loading_error,
    loading_error_operator,
    max_norm_diff,
    relative_norm,
    sparsity_measure,
)
from .pipeline import (
    PipelineConfig,
    estimate_method1,
    estimate_method2,
    estimate_oracle,
    initial_idio_estimate,
)
from .selection import KSelectionResult, select_k_eigen_ratio, select_k_ic
from .simulate import (
    SimConfig,
    asymptotic_normality_check,
    benchmark_dc,
    generate_model,
    monte_carlo_table,
)
from .threshold import (
    ThresholdConfig,
    choose_threshold_constant,
    hard_threshold_correlation,
    pca_residual_matrix,
    residual_covariance_threshold,
    sample_covariance,
    threshold_rate,
)
from .wpca import WpcaResult, identifiable_rotation, pc_factors, weighted_pc

__version__ = "0.1.0"

__all__ = [
    "ErrorReport",
    "FactorModelEstimate",
    "FisherReport",
    "KSelectionResult",
    "ObservationMatrix",
    "Partition",
    "PipelineConfig",
    "SimConfig",
    "SubsetSelector",
    "ThresholdConfig",
    "TrueModel",
    "WpcaResult",
    "align_factors",
    "asymptotic_normality_check",
    "benchmark_dc",
    "check_model_conditions",
    "choose_threshold_constant",
    "component_error",
    "dc_estimate",
    "estimate_method1",
    "estimate_method2",
    "estimate_oracle",
    "factor_error",
    "fisher_dominance",
    "fisher_dominance_expected",
    "generate_model",
    "hard_threshold_correlation",
    "identifiable_rotation",
    "initial_idio_estimate",
    "inv_operator_norm_diff",
    "load_panel_csv",
    "loading_error",
    "loading_error_operator",
    "max_norm_diff",
    "monte_carlo_table",
    "partition_variables",
    "pc_factors",
    "pca_residual_matrix",
    "relative_norm",
    "residual_covariance_threshold",
    "restrict",
    "sample_covariance",
    "select_k_eigen_ratio",
    "select_k_ic",
    "sparsity_measure",
    "threshold_rate",
    "validate",
    "weighted_pc",
]
