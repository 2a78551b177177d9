"""Maximum entropy discrimination with discriminative feature selection.

Binary classifiers and scalar regressors trained by maximizing a concave
dual objective over box-constrained multipliers, with optional per-feature
switch terms that drive irrelevant coefficients to zero. Two optimizers are
provided: randomized axis-parallel line search and an iterated bounded QP
built from a variational quadratic lower bound.
"""

from .data import (
    CLASSIFICATION,
    REGRESSION,
    Dataset,
    ScalingParams,
    SparseBinaryProblem,
    expand_powers,
    fit_scaling,
    gen_sinc,
    gen_sparse_binary,
    load_csv,
    polynomial_expand,
    power_feature_names,
    sinc,
    standardize,
)
from .expfam import (
    ExpFamily,
    GenerativeFit,
    GenerativeGaussianMed,
    expfam_log_partition,
    fit_generative,
    gaussian_family,
    load_generative,
    save_generative,
)
from .metrics import (
    RocCurve,
    coefficient_cdf,
    eps_insensitive_loss,
    least_squares_fit,
    rmse,
    roc_curve,
)
from .model import (
    FeatureStats,
    MedClassifier,
    MedRegressor,
    compute_feature_stats,
    load_model,
    recover_bias,
    save_model,
)
from .objective import (
    BoxViolationError,
    FeasibilityError,
    FeatureSelectClassificationDual,
    FeatureSelectRegressionDual,
    Hyperparams,
    ObjectiveEval,
    SurrogateError,
    SvmClassificationDual,
    SvmRegressionDual,
    build_objective,
    classification_margin_penalty,
    classification_margin_penalty_deriv,
    feature_inclusion_prob,
    regression_margin_penalty,
    regression_margin_penalty_deriv,
    split_duals,
    stack_duals,
)
from .optimizer import (
    OptimizerConfig,
    OptResult,
    QuadBound,
    axis_parallel_maximize,
    brent_maximize,
    brent_minimize,
    build_quad_bound,
    iterated_bounded_qp,
    maximize,
    qp_subsolve,
)

__version__ = "0.1.0"

__all__ = [
    "CLASSIFICATION",
    "REGRESSION",
    "Dataset",
    "ScalingParams",
    "SparseBinaryProblem",
    "expand_powers",
    "fit_scaling",
    "gen_sinc",
    "gen_sparse_binary",
    "load_csv",
    "polynomial_expand",
    "power_feature_names",
    "sinc",
    "standardize",
    "ExpFamily",
    "GenerativeFit",
    "GenerativeGaussianMed",
    "expfam_log_partition",
    "fit_generative",
    "gaussian_family",
    "load_generative",
    "save_generative",
    "RocCurve",
    "coefficient_cdf",
    "eps_insensitive_loss",
    "least_squares_fit",
    "rmse",
    "roc_curve",
    "FeatureStats",
    "MedClassifier",
    "MedRegressor",
    "compute_feature_stats",
    "load_model",
    "recover_bias",
    "save_model",
    "BoxViolationError",
    "FeasibilityError",
    "FeatureSelectClassificationDual",
    "FeatureSelectRegressionDual",
    "Hyperparams",
    "ObjectiveEval",
    "SurrogateError",
    "SvmClassificationDual",
    "SvmRegressionDual",
    "build_objective",
    "classification_margin_penalty",
    "classification_margin_penalty_deriv",
    "feature_inclusion_prob",
    "regression_margin_penalty",
    "regression_margin_penalty_deriv",
    "split_duals",
    "stack_duals",
    "OptimizerConfig",
    "OptResult",
    "QuadBound",
    "axis_parallel_maximize",
    "brent_maximize",
    "brent_minimize",
    "build_quad_bound",
    "iterated_bounded_qp",
    "maximize",
    "qp_subsolve",
    "__version__",
]
