"""Drifted fractional Brownian motion: exact path simulation, fractional
calculus operators, change-of-measure diagnostics, and James-Stein-type
shrinkage estimators benchmarked by Monte Carlo quadratic risk."""

from .config import (
    ConfigError,
    ExperimentConfig,
    RunManifest,
    config_from_manifest,
    load_config,
    parse_config,
    write_manifest,
)
from .drift import (
    ChangeOfMeasureCheck,
    DriftSpec,
    GirsanovEvaluation,
    MeanOneCheck,
    MembershipReport,
    builtin_drift,
    change_of_measure_check,
    girsanov_log_density,
    girsanov_mean_one_check,
    validate_membership,
)
from .fracops import (
    AcFunction,
    SampledFunction,
    apply_K,
    apply_K_inverse,
    apply_K_inverse_smooth,
    beta_fn,
    fbm_kernel,
    fbm_kernel_by_quadrature,
    gamma_fn,
    kernel_cell_averages,
    kernel_covariance_quad,
    kernel_norm_const,
    rl_derivative,
    rl_integral,
)
from .model import FbmModel, PathMatrix, RngStream
from .risk import (
    DominanceReport,
    InverseNormCheck,
    RiskEstimate,
    SteinIdentityCheck,
    UnbiasednessCheck,
    cramer_rao_bound,
    cramer_rao_value,
    inverse_norm_moment_check,
    quadratic_risk_mc,
    risk_difference_paired,
    risk_difference_paired_multi,
    stein_identity_check,
    unbiasedness_check,
)
from .shrinkage import (
    R_FUNCTIONS,
    R_ONE,
    R_RATIONAL,
    DominanceCertificate,
    Estimator,
    RFunctionSpec,
    ShrinkageSpec,
    g_divergence,
    g_shift,
    make_estimator,
    mle_estimate,
    shrinkage_estimate,
    stein_integrand,
    validate_dominance_conditions,
)
from .simulate import (
    CirculantEmbeddingError,
    CovarianceFactorizationError,
    add_drift,
    fbm_covariance,
    fgn_autocovariance,
    path_to_csv,
    simulate_fbm,
    simulate_volterra_pair,
)

__version__ = "0.1.0"
