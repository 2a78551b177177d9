"""Evaluation helpers: ROC curves, coefficient concentration, losses."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np


class RocCurve(NamedTuple):
    # points is an (n, 2) array of (false positive rate, true positive rate)
    points: np.ndarray
    auc: float


def roc_curve(y_true, scores):
    """ROC curve from a descending sweep over the distinct scores.

    Tied scores move as one group, so ties between the classes produce
    diagonal segments and the trapezoid area equals the pair-counting
    statistic with half credit for ties. Needs both classes present.
    """
    y_true = np.asarray(y_true, dtype=np.float64).ravel()
    scores = np.asarray(scores, dtype=np.float64).ravel()
    if y_true.shape != scores.shape:
        raise ValueError("y_true and scores disagree on length")
    if not np.all(np.isin(y_true, (-1.0, 1.0))):
        raise ValueError("labels must be -1 or +1")
    npos = int(np.sum(y_true == 1.0))
    nneg = y_true.size - npos
    if npos == 0 or nneg == 0:
        raise ValueError("ROC needs at least one example of each class")
    order = np.argsort(-scores, kind="stable")
    ys = y_true[order]
    ss = scores[order]
    tp = fp = 0
    pts = [(0.0, 0.0)]
    i = 0
    n = ys.size
    while i < n:
        j = i
        while j < n and ss[j] == ss[i]:
            j += 1
        tp += int(np.sum(ys[i:j] == 1.0))
        fp += (j - i) - int(np.sum(ys[i:j] == 1.0))
        pts.append((fp / nneg, tp / npos))
        i = j
    points = np.asarray(pts, dtype=np.float64)
    auc = float(np.trapz(points[:, 1], points[:, 0]))
    return RocCurve(points, auc)


def coefficient_cdf(values, grid_size=200, top=None):
    """Fraction of coefficient magnitudes at or below each grid threshold.

    The grid runs evenly from 0 to the largest magnitude (0 to 1 when every
    value is zero, where the fraction is 1 everywhere); pass top to pin the
    grid end instead, e.g. to put two models on a shared grid. Returns a
    (grid_size, 2) array of (threshold, fraction); the fraction uses <=, so
    the curve is right-continuous and, on the default grid, ends at 1.
    """
    values = np.abs(np.asarray(values, dtype=np.float64).ravel())
    if values.size == 0:
        raise ValueError("need at least one coefficient")
    if grid_size < 2:
        raise ValueError("grid_size must be at least 2")
    if top is None:
        top = float(values.max())
    elif top < 0:
        raise ValueError("top must be nonnegative")
    grid = np.linspace(0.0, top if top > 0.0 else 1.0, grid_size)
    frac = np.searchsorted(np.sort(values), grid, side="right") / values.size
    return np.column_stack([grid, frac])


def eps_insensitive_loss(y_true, y_pred, epsilon):
    """Mean of the residual magnitude beyond the epsilon tube."""
    y_true = np.asarray(y_true, dtype=np.float64).ravel()
    y_pred = np.asarray(y_pred, dtype=np.float64).ravel()
    if y_true.shape != y_pred.shape:
        raise ValueError("y_true and y_pred disagree on length")
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    return float(np.mean(np.maximum(np.abs(y_true - y_pred) - epsilon, 0.0)))


def rmse(y_true, y_pred):
    y_true = np.asarray(y_true, dtype=np.float64).ravel()
    y_pred = np.asarray(y_pred, dtype=np.float64).ravel()
    if y_true.shape != y_pred.shape:
        raise ValueError("y_true and y_pred disagree on length")
    return float(np.sqrt(np.mean((y_true - y_pred) ** 2)))


def least_squares_fit(X, y):
    """Ordinary least squares with an intercept via jittered normal equations.

    Returns (coef, intercept). The tiny ridge (1e-10 on the diagonal) only
    matters when the design is rank deficient.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValueError("X must be 2-D and aligned with y")
    Z = np.hstack([X, np.ones((X.shape[0], 1))])
    G = Z.T @ Z + 1e-10 * np.eye(Z.shape[1])
    w = np.linalg.solve(G, Z.T @ y)
    return w[:-1], float(w[-1])
