"""Generative large-margin classification for exponential-family models.

A two-class generative model with identity sufficient statistics is trained
discriminatively. Densities have the form

    p(x | theta) = exp(log_carrier(x) + theta @ x - K(theta))

and the parameter prior is conjugate, p(theta | chi) proportional to
exp(carrier(theta) + theta @ chi - conjugate_cumulant(chi)). Averaging the
margin constraints over the parameter posterior turns the partition function
into a difference of conjugate-cumulant evaluations, provided the duals
satisfy the balance constraint sum_t lambda_t y_t = 0 (otherwise the data
cumulant K(theta) fails to cancel and the closed form is invalid).
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .objective import Hyperparams, SvmClassificationDual
from .optimizer import OptimizerConfig, maximize

SCHEMA_VERSION = 1
GENERATIVE_MODE = "generative-gaussian"

_BALANCE_TOL = 1e-8


@dataclass(frozen=True)
class ExpFamily:
    """Descriptor of an exponential family with identity sufficient statistics.

    log_carrier is the x-dependent additive log-density term; the implicit
    data cumulant K(theta) never needs to be evaluated because it cancels
    under the balance constraint. conjugate_cumulant is the log normalizer of
    the conjugate prior as a function of its natural parameter (convex); chi0
    is the prior's natural parameter. Additive constants in conjugate_cumulant
    are fixed so that conjugate_cumulant(chi0) need not be zero but only
    differences ever enter the objective.
    """

    name: str
    dim: int
    log_carrier: Callable[[np.ndarray], float]
    conjugate_cumulant: Callable[[np.ndarray], float]
    chi0: np.ndarray


def gaussian_family(dim):
    """Unit-covariance gaussian family with a standard normal prior on the mean.

    log_carrier(x) = -||x||^2/2 - (dim/2) log 2pi and
    conjugate_cumulant(chi) = ||chi||^2/2 (constant absorbed so it is 0 at the
    prior parameter chi0 = 0).
    """
    if dim < 1:
        raise ValueError("dim must be at least 1")
    half_log_2pi = 0.5 * dim * math.log(2.0 * math.pi)

    def log_carrier(x):
        x = np.asarray(x, dtype=np.float64)
        return -0.5 * float(x @ x) - half_log_2pi

    def conjugate_cumulant(chi):
        chi = np.asarray(chi, dtype=np.float64)
        return 0.5 * float(chi @ chi)

    return ExpFamily("gaussian", dim, log_carrier, conjugate_cumulant,
                     np.zeros(dim))


def expfam_log_partition(family, duals, X, y, sign=1):
    """Closed-form log partition of one class posterior under tilted margins.

    Returns conjugate_cumulant(chi0 + sum_t lambda_t s y_t x_t)
    + sum_t lambda_t s y_t log_carrier(x_t) - conjugate_cumulant(chi0) with
    s = +1 for the positive-class parameter and -1 for the negative one.
    Valid only when sum_t lambda_t y_t is zero (within 1e-8): that balance is
    what cancels the data cumulant inside the integral.
    """
    duals = np.asarray(duals, dtype=np.float64)
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    if X.ndim != 2 or X.shape[0] != duals.shape[0] or y.shape[0] != X.shape[0]:
        raise ValueError("duals, X and y disagree on the number of examples")
    if X.shape[1] != family.dim:
        raise ValueError(
            f"family dimension {family.dim} does not match X ({X.shape[1]})"
        )
    if sign not in (1, -1, +1.0, -1.0, "+", "-"):
        raise ValueError("sign must be +1 or -1")
    s = -1.0 if sign in (-1, -1.0, "-") else 1.0
    balance = float(duals @ y)
    if abs(balance) > _BALANCE_TOL:
        raise ValueError(
            f"the closed form needs sum(duals * y) = 0; residual {balance!r}"
        )
    tilt = s * duals * y
    chi = family.chi0 + X.T @ tilt
    carriers = sum(
        float(t) * family.log_carrier(X[i]) for i, t in enumerate(tilt) if t
    )
    return (
        float(family.conjugate_cumulant(chi))
        + carriers
        - float(family.conjugate_cumulant(family.chi0))
    )


class GenerativeFit(NamedTuple):
    chi_pos: np.ndarray
    chi_neg: np.ndarray
    bias: float
    duals: np.ndarray
    value: float
    trace: list
    iterations: int
    converged: bool


def fit_generative(X, y, c=10.0, sigma=10.0, family=None, tol=1e-8,
                   max_iter=10_000, seed=0):
    """Fit the two-class generative model under the balance constraint.

    The objective is the margin penalty sum minus the two class log
    partitions. For the gaussian family those partitions are quadratic in the
    duals and both classes shift by the same signed combination w of training
    points, so the dual is exactly the plain classification dual on
    sqrt(2)-scaled inputs (the carrier terms cancel between the two classes).
    The bias is the posterior mean under its gaussian prior, sigma^2 times the
    balance sum, which the constraint pins to zero up to roundoff; class-prior
    constants are folded into it.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    if family is None:
        family = gaussian_family(X.shape[1] if X.ndim == 2 else 1)
    if X.ndim != 2 or family.dim != X.shape[1]:
        raise ValueError(
            f"family dimension {family.dim} does not match X"
        )
    hyper = Hyperparams(c=c, sigma=sigma, variant="svm", bias_mode="hard")
    objective = SvmClassificationDual(X * math.sqrt(2.0), y, hyper)
    config = OptimizerConfig(method="axis_parallel", tol=tol,
                             max_iter=max_iter, seed=seed)
    result = maximize(objective, None, config)
    w = X.T @ (result.duals * y)
    chi_pos = family.chi0 + w
    chi_neg = family.chi0 - w
    bias = sigma**2 * float(y @ result.duals)
    return GenerativeFit(chi_pos, chi_neg, bias, result.duals, result.value,
                         list(result.trace), result.iterations,
                         result.converged)


class GenerativeGaussianMed(ClassifierMixin, BaseEstimator):
    """Discriminatively trained two-gaussian classifier.

    The decision rule averages the gaussian log-likelihood ratio over the
    parameter posteriors; with identity covariance the posterior means equal
    the natural parameters and the averaged rule is affine in x, so prediction
    uses the posterior-mean plug-in score
    (mu_pos - mu_neg) @ x - (||mu_pos||^2 - ||mu_neg||^2)/2 + bias exactly
    (the quadratic posterior-variance terms are identical for both classes
    and cancel in the ratio).
    """

    def __init__(self, c=10.0, sigma=10.0, tol=1e-8, max_iter=10_000,
                 random_state=0):
        self.c = c
        self.sigma = sigma
        self.tol = tol
        self.max_iter = max_iter
        self.random_state = random_state

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64, y_numeric=True)
        bad = ~np.isin(y, (-1.0, 1.0))
        if bad.any():
            raise ValueError("classification targets must be -1 or +1")
        self.classes_ = np.array([-1.0, 1.0])
        self.n_features_in_ = X.shape[1]
        family = gaussian_family(X.shape[1])
        fitres = fit_generative(
            X, y, c=self.c, sigma=self.sigma, family=family, tol=self.tol,
            max_iter=self.max_iter,
            seed=0 if self.random_state is None else int(self.random_state),
        )
        self.chi_pos_ = fitres.chi_pos
        self.chi_neg_ = fitres.chi_neg
        self.bias_ = fitres.bias
        self.coef_ = fitres.chi_pos - fitres.chi_neg
        self.intercept_ = fitres.bias - (
            family.conjugate_cumulant(fitres.chi_pos)
            - family.conjugate_cumulant(fitres.chi_neg)
        )
        self.duals_ = fitres.duals
        self.objective_value_ = fitres.value
        self.objective_trace_ = fitres.trace
        self.n_iter_ = fitres.iterations
        self.converged_ = fitres.converged
        return self

    def decision_function(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, expected {self.n_features_in_}"
            )
        return X @ self.coef_ + self.intercept_

    def predict(self, X):
        return np.where(self.decision_function(X) >= 0.0, 1.0, -1.0)


def save_generative(model, path, feature_names=None):
    """Write a fitted generative classifier to a JSON model file."""
    check_is_fitted(model, "coef_")
    if feature_names is None:
        feature_names = [f"x{i}" for i in range(model.n_features_in_)]
    if len(feature_names) != model.n_features_in_:
        raise ValueError(
            f"got {len(feature_names)} feature names for "
            f"{model.n_features_in_} inputs"
        )
    blob = {
        "version": SCHEMA_VERSION,
        "mode": GENERATIVE_MODE,
        "hyperparams": {
            "c": model.c,
            "sigma": model.sigma,
            "n_input_features": int(model.n_features_in_),
        },
        "feature_names": list(feature_names),
        "chi_pos": model.chi_pos_.tolist(),
        "chi_neg": model.chi_neg_.tolist(),
        "bias": float(model.bias_),
        "converged": bool(model.converged_),
        "objective_value": float(model.objective_value_),
        "duals": model.duals_.tolist(),
    }
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "w") as fh:
        json.dump(blob, fh, indent=1)
        fh.write("\n")
    os.replace(tmp, path)


def load_generative(path):
    """Read a generative model file back into a fitted classifier."""
    with open(path) as fh:
        blob = json.load(fh)
    for section in ("version", "mode", "hyperparams", "chi_pos", "chi_neg",
                    "bias"):
        if section not in blob:
            raise ValueError(f"model file {path} is missing {section!r}")
    if blob["version"] != SCHEMA_VERSION:
        raise ValueError(
            f"model file {path} has format version {blob['version']!r}; "
            f"this build reads version {SCHEMA_VERSION}"
        )
    if blob["mode"] != GENERATIVE_MODE:
        raise ValueError(
            f"model file {path} holds a {blob['mode']!r} model, expected "
            f"{GENERATIVE_MODE!r}"
        )
    hp = blob["hyperparams"]
    model = GenerativeGaussianMed(c=hp.get("c", 10.0),
                                  sigma=hp.get("sigma", 10.0))
    model.classes_ = np.array([-1.0, 1.0])
    model.n_features_in_ = int(hp["n_input_features"])
    model.chi_pos_ = np.asarray(blob["chi_pos"], dtype=np.float64)
    model.chi_neg_ = np.asarray(blob["chi_neg"], dtype=np.float64)
    model.bias_ = float(blob["bias"])
    family = gaussian_family(model.n_features_in_)
    model.coef_ = model.chi_pos_ - model.chi_neg_
    model.intercept_ = model.bias_ - (
        family.conjugate_cumulant(model.chi_pos_)
        - family.conjugate_cumulant(model.chi_neg_)
    )
    model.converged_ = bool(blob.get("converged", True))
    if blob.get("objective_value") is not None:
        model.objective_value_ = float(blob["objective_value"])
    if blob.get("duals") is not None:
        model.duals_ = np.asarray(blob["duals"], dtype=np.float64)
    model.feature_names_ = list(blob.get("feature_names", []))
    return model
