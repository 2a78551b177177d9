"""Estimators with a scikit-learn face, plus model persistence.

MedClassifier and MedRegressor wrap the dual objectives and optimizers into
fit/predict/transform estimators. Both expand inputs with elementwise powers,
optionally standardize, maximize the configured dual, and then recover the
prediction weights and bias from the optimal dual variables.
"""

from __future__ import annotations

import json
import os
from typing import NamedTuple

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .data import (
    CLASSIFICATION,
    REGRESSION,
    ScalingParams,
    expand_powers,
    fit_scaling,
    power_feature_names,
)
from .objective import (
    Hyperparams,
    build_objective,
    classification_margin_penalty_deriv,
    feature_inclusion_prob,
    regression_margin_penalty_deriv,
    split_duals,
)
from .optimizer import OptimizerConfig, maximize

SCHEMA_VERSION = 1

# duals at or below this fraction of c are treated as inactive by the
# hard-mode bias heuristic
_ACTIVE_FRACTION = 1e-9


class FeatureStats(NamedTuple):
    coef: np.ndarray
    probs: np.ndarray


def compute_feature_stats(raw_coef, p0, variant):
    """Effective prediction weights and per-feature inclusion probabilities.

    The selection variant shrinks each raw weight by the posterior probability
    that its switch is on; the plain variant keeps raw weights and reports
    probability one everywhere.
    """
    raw_coef = np.asarray(raw_coef, dtype=np.float64)
    if variant == "fs":
        probs = feature_inclusion_prob(raw_coef, p0)
        return FeatureStats(probs * raw_coef, probs)
    return FeatureStats(raw_coef.copy(), np.ones_like(raw_coef))


def recover_bias(objective, duals, coef):
    """Bias term implied by the optimized duals.

    Soft bias mode has a closed form. Hard mode uses the stationarity
    condition of the most-active dual on each side as a heuristic, averaging
    the available estimates; it needs at least one active dual.
    """
    hyper = objective.hyper
    duals = np.asarray(duals, dtype=np.float64)
    if objective.soft:
        if objective.task == CLASSIFICATION:
            return hyper.sigma**2 * float(objective.y @ duals)
        lam, lamp = split_duals(duals)
        return hyper.sigma * float(np.sum(lam - lamp))
    thresh = _ACTIVE_FRACTION * hyper.c
    s_nb = objective.X @ np.asarray(coef, dtype=np.float64)
    estimates = []
    if objective.task == CLASSIFICATION:
        egamma = classification_margin_penalty_deriv(duals, hyper.c)
        for cls in (1.0, -1.0):
            idx = np.flatnonzero((objective.y == cls) & (duals > thresh))
            if idx.size:
                t = idx[np.argmax(duals[idx])]
                estimates.append(cls * egamma[t] - s_nb[t])
    else:
        lam, lamp = split_duals(duals)
        t = int(np.argmax(lam))
        if lam[t] > thresh:
            d = regression_margin_penalty_deriv(
                np.array([lam[t]]), hyper.c, hyper.epsilon
            )[0]
            estimates.append(objective.y[t] - s_nb[t] - d)
        u = int(np.argmax(lamp))
        if lamp[u] > thresh:
            d = regression_margin_penalty_deriv(
                np.array([lamp[u]]), hyper.c, hyper.epsilon
            )[0]
            estimates.append(objective.y[u] - s_nb[u] + d)
    if not estimates:
        raise ValueError(
            "cannot recover the bias in hard mode: every dual is zero "
            "(the fit is degenerate; lower c or check the targets)"
        )
    return float(np.mean(estimates))


class _MedBase(BaseEstimator):
    """Shared fitting pipeline: expand powers, scale, maximize, extract."""

    _task = None

    def _fit_common(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64, y_numeric=True)
        if not isinstance(self.degree, (int, np.integer)) or self.degree < 1:
            raise ValueError("degree must be an integer >= 1")
        self.n_features_in_ = X.shape[1]
        Xe = expand_powers(X, int(self.degree))
        if self.standardize:
            self.scaling_ = fit_scaling(Xe)
            Xe = self.scaling_.apply(Xe)
        else:
            self.scaling_ = None
        hyper = Hyperparams(
            c=self.c,
            epsilon=getattr(self, "epsilon", 0.2),
            p0=self.p0,
            sigma=self.sigma,
            variant=self.variant,
            bias_mode=self.bias_mode,
        )
        objective = build_objective(self._task, Xe, y, hyper)
        config = OptimizerConfig(
            method=self.optimizer,
            tol=self.tol,
            max_iter=self.max_iter,
            seed=0 if self.random_state is None else int(self.random_state),
            qp_inner_tol=self.qp_inner_tol,
            qp_max_inner=self.qp_max_inner,
        )
        result = maximize(objective, None, config)
        self.objective_value_ = result.value
        self.objective_trace_ = list(result.trace)
        self.n_iter_ = result.iterations
        self.converged_ = result.converged
        if self._task == CLASSIFICATION:
            self.duals_ = result.duals
            raw = objective.A.T @ result.duals
        else:
            self.duals_, self.duals_prime_ = split_duals(result.duals)
            raw = objective.X.T @ (self.duals_ - self.duals_prime_)
        stats = compute_feature_stats(raw, self.p0, self.variant)
        self.raw_coef_ = raw
        self.coef_ = stats.coef
        self.inclusion_probs_ = stats.probs
        self.selected_ = self.inclusion_probs_ >= 0.5
        self.intercept_ = recover_bias(objective, result.duals, self.coef_)
        return self

    def _transform_features(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, expected {self.n_features_in_}"
            )
        Xe = expand_powers(X, int(self.degree))
        if self.scaling_ is not None:
            Xe = self.scaling_.apply(Xe)
        return Xe

    def transform(self, X):
        """Expanded, scaled features restricted to the selected columns."""
        return self._transform_features(X)[:, self.selected_]

    def _raw_scores(self, X):
        return self._transform_features(X) @ self.coef_ + self.intercept_


class MedClassifier(ClassifierMixin, _MedBase):
    """Binary large-margin classifier with optional built-in feature selection.

    Targets must be -1/+1. variant="fs" learns per-feature switch posteriors
    that shrink uninformative weights toward zero; variant="svm" is the plain
    quadratic-kernel-free large-margin fit. bias_mode "soft" treats the bias
    as a zero-mean gaussian with scale sigma; "hard" constrains the duals to
    the balanced hyperplane and recovers the bias afterwards.
    """

    _task = CLASSIFICATION

    def __init__(self, c=10.0, p0=0.99999, sigma=10.0, variant="fs",
                 bias_mode="soft", degree=1, standardize=False,
                 optimizer="axis_parallel", tol=1e-8, max_iter=10_000,
                 qp_inner_tol=1e-8, qp_max_inner=300, random_state=0):
        self.c = c
        self.p0 = p0
        self.sigma = sigma
        self.variant = variant
        self.bias_mode = bias_mode
        self.degree = degree
        self.standardize = standardize
        self.optimizer = optimizer
        self.tol = tol
        self.max_iter = max_iter
        self.qp_inner_tol = qp_inner_tol
        self.qp_max_inner = qp_max_inner
        self.random_state = random_state

    def fit(self, X, y):
        y = np.asarray(y, dtype=np.float64).ravel()
        bad = ~np.isin(y, (-1.0, 1.0))
        if bad.any():
            raise ValueError(
                f"classification targets must be -1 or +1; "
                f"row {int(np.flatnonzero(bad)[0])} has {y[np.flatnonzero(bad)[0]]!r}"
            )
        self.classes_ = np.array([-1.0, 1.0])
        return self._fit_common(X, y)

    def decision_function(self, X):
        return self._raw_scores(X)

    def predict(self, X):
        # ties on the boundary go to the positive class
        return np.where(self.decision_function(X) >= 0.0, 1.0, -1.0)


class MedRegressor(RegressorMixin, _MedBase):
    """Epsilon-insensitive linear regressor with optional feature selection.

    Residuals inside the epsilon tube are free; outside they are paid for
    through the dual margin penalties with scale c. See MedClassifier for the
    meaning of variant and bias_mode.
    """

    _task = REGRESSION

    def __init__(self, c=10.0, epsilon=0.2, p0=0.99999, sigma=10.0,
                 variant="fs", bias_mode="soft", degree=1, standardize=False,
                 optimizer="axis_parallel", tol=1e-8, max_iter=10_000,
                 qp_inner_tol=1e-8, qp_max_inner=300, random_state=0):
        self.c = c
        self.epsilon = epsilon
        self.p0 = p0
        self.sigma = sigma
        self.variant = variant
        self.bias_mode = bias_mode
        self.degree = degree
        self.standardize = standardize
        self.optimizer = optimizer
        self.tol = tol
        self.max_iter = max_iter
        self.qp_inner_tol = qp_inner_tol
        self.qp_max_inner = qp_max_inner
        self.random_state = random_state

    def fit(self, X, y):
        return self._fit_common(X, y)

    def predict(self, X):
        return self._raw_scores(X)


def _scaling_to_json(scaling):
    if scaling is None:
        return None
    return {
        "shift": scaling.shift.tolist(),
        "scale": scaling.scale.tolist(),
        "constant_mask": scaling.constant_mask.tolist(),
    }


def _scaling_from_json(blob):
    if blob is None:
        return None
    return ScalingParams(
        shift=np.asarray(blob["shift"], dtype=np.float64),
        scale=np.asarray(blob["scale"], dtype=np.float64),
        constant_mask=np.asarray(blob["constant_mask"], dtype=bool),
    )


def save_model(model, path, feature_names=None):
    """Write a fitted estimator to a JSON model file.

    feature_names are the names of the raw input columns; expanded power
    names are derived from them. Floats survive a save/load round trip
    bit-exactly.
    """
    check_is_fitted(model, "coef_")
    mode = model._task
    if feature_names is None:
        feature_names = [f"x{i}" for i in range(model.n_features_in_)]
    if len(feature_names) != model.n_features_in_:
        raise ValueError(
            f"got {len(feature_names)} feature names for "
            f"{model.n_features_in_} inputs"
        )
    expanded = power_feature_names(list(feature_names), int(model.degree))
    blob = {
        "version": SCHEMA_VERSION,
        "mode": mode,
        "hyperparams": {
            "c": model.c,
            "epsilon": getattr(model, "epsilon", 0.2),
            "p0": model.p0,
            "sigma": model.sigma,
            "variant": model.variant,
            "bias_mode": model.bias_mode,
            "degree": int(model.degree),
            "n_input_features": int(model.n_features_in_),
        },
        "feature_names": list(expanded),
        "W": model.raw_coef_.tolist(),
        "P": model.inclusion_probs_.tolist(),
        "W_tilde": model.coef_.tolist(),
        "bias": float(model.intercept_),
        "scaling": _scaling_to_json(model.scaling_),
        "converged": bool(model.converged_),
        "objective_value": float(model.objective_value_),
        "duals": model.duals_.tolist(),
        "duals_prime": (
            model.duals_prime_.tolist() if mode == REGRESSION else None
        ),
    }
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "w") as fh:
        json.dump(blob, fh, indent=1)
        fh.write("\n")
    os.replace(tmp, path)


def load_model(path, expected_mode=None):
    """Read a model file back into a fitted estimator.

    Raises ValueError on schema problems or when expected_mode (either
    "classification" or "regression") disagrees with the file.
    """
    with open(path) as fh:
        blob = json.load(fh)
    for section in ("version", "mode", "hyperparams", "W", "P", "W_tilde",
                    "bias"):
        if section not in blob:
            raise ValueError(f"model file {path} is missing {section!r}")
    if blob["version"] != SCHEMA_VERSION:
        raise ValueError(
            f"model file {path} has format version {blob['version']!r}; "
            f"this build reads version {SCHEMA_VERSION}"
        )
    mode = blob["mode"]
    if mode not in (CLASSIFICATION, REGRESSION):
        raise ValueError(f"model file {path} has unknown mode {mode!r}")
    if expected_mode is not None and mode != expected_mode:
        raise ValueError(
            f"model file {path} holds a {mode} model, expected {expected_mode}"
        )
    hp = blob["hyperparams"]
    for key in ("c", "p0", "sigma", "variant", "bias_mode", "degree",
                "n_input_features"):
        if key not in hp:
            raise ValueError(f"model file {path} is missing hyperparams.{key}")
    common = dict(
        c=hp["c"], p0=hp["p0"], sigma=hp["sigma"], variant=hp["variant"],
        bias_mode=hp["bias_mode"], degree=hp["degree"],
    )
    if mode == CLASSIFICATION:
        model = MedClassifier(**common)
        model.classes_ = np.array([-1.0, 1.0])
    else:
        model = MedRegressor(epsilon=hp.get("epsilon", 0.2), **common)
    model.n_features_in_ = int(hp["n_input_features"])
    model.raw_coef_ = np.asarray(blob["W"], dtype=np.float64)
    model.inclusion_probs_ = np.asarray(blob["P"], dtype=np.float64)
    model.coef_ = np.asarray(blob["W_tilde"], dtype=np.float64)
    model.selected_ = model.inclusion_probs_ >= 0.5
    model.intercept_ = float(blob["bias"])
    model.scaling_ = _scaling_from_json(blob.get("scaling"))
    model.standardize = model.scaling_ is not None
    model.converged_ = bool(blob.get("converged", True))
    if blob.get("objective_value") is not None:
        model.objective_value_ = float(blob["objective_value"])
    if blob.get("duals") is not None:
        model.duals_ = np.asarray(blob["duals"], dtype=np.float64)
    if mode == REGRESSION and blob.get("duals_prime") is not None:
        model.duals_prime_ = np.asarray(blob["duals_prime"], dtype=np.float64)
    model.feature_names_ = list(blob.get("feature_names", []))
    n_expanded = model.coef_.shape[0]
    if model.raw_coef_.shape[0] != n_expanded or (
        model.inclusion_probs_.shape[0] != n_expanded
    ):
        raise ValueError(f"model file {path} has inconsistent weight lengths")
    return model
