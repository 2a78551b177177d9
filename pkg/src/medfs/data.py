"""Dataset container, CSV loading, feature expansion, scaling, and synthetic generators."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

CLASSIFICATION = "classification"
REGRESSION = "regression"

_MODES = (CLASSIFICATION, REGRESSION)


def _frozen_array(values, dtype=np.float64):
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Dataset:
    """Immutable supervised dataset.

    Parameters
    ----------
    examples : ndarray of shape (n_samples, n_features)
        Finite feature values.
    targets : ndarray of shape (n_samples,)
        Labels in {-1, +1} for classification mode, finite reals for regression.
    feature_names : tuple of str
        One name per feature column.
    mode : str
        Either "classification" or "regression".
    """

    examples: np.ndarray
    targets: np.ndarray
    feature_names: tuple
    mode: str

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.examples, dtype=np.float64))
        y = np.asarray(self.targets, dtype=np.float64).ravel()
        names = tuple(str(n) for n in self.feature_names)
        if self.mode not in _MODES:
            raise ValueError(f"unknown mode {self.mode!r}; expected one of {_MODES}")
        if X.ndim != 2:
            raise ValueError("examples must be a 2-D array")
        if X.shape[0] != y.shape[0]:
            raise ValueError(
                f"examples ({X.shape[0]} rows) and targets ({y.shape[0]}) disagree"
            )
        if X.shape[0] == 0:
            raise ValueError("dataset must contain at least one example")
        if len(names) != X.shape[1]:
            raise ValueError(
                f"{len(names)} feature names for {X.shape[1]} feature columns"
            )
        if not np.all(np.isfinite(X)):
            raise ValueError("examples contain non-finite values")
        if not np.all(np.isfinite(y)):
            raise ValueError("targets contain non-finite values")
        if self.mode == CLASSIFICATION:
            bad = np.flatnonzero(~np.isin(y, (-1.0, 1.0)))
            if bad.size:
                raise ValueError(
                    f"classification targets must be -1 or +1; "
                    f"row {bad[0]} has {y[bad[0]]!r}"
                )
        object.__setattr__(self, "examples", _frozen_array(X))
        object.__setattr__(self, "targets", _frozen_array(y))
        object.__setattr__(self, "feature_names", names)

    def __len__(self):
        return self.examples.shape[0]

    @property
    def n_features(self):
        return self.examples.shape[1]


@dataclass(frozen=True)
class ScalingParams:
    """Per-feature affine scaling fitted by :func:`standardize`.

    Constant columns get scale 1 and are flagged in ``constant_mask``.
    """

    shift: np.ndarray
    scale: np.ndarray
    constant_mask: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "shift", _frozen_array(self.shift))
        object.__setattr__(self, "scale", _frozen_array(self.scale))
        object.__setattr__(
            self, "constant_mask", _frozen_array(self.constant_mask, dtype=bool)
        )
        if not (self.shift.shape == self.scale.shape == self.constant_mask.shape):
            raise ValueError("scaling fields must have matching shapes")
        if np.any(self.scale <= 0):
            raise ValueError("scales must be positive")

    def apply(self, X):
        """Return ``(X - shift) / scale``."""
        X = np.asarray(X, dtype=np.float64)
        if X.shape[-1] != self.shift.shape[0]:
            raise ValueError(
                f"expected {self.shift.shape[0]} features, got {X.shape[-1]}"
            )
        return (X - self.shift) / self.scale


def load_csv(path, target_column, mode):
    """Load a headed CSV file into a :class:`Dataset`.

    Parameters
    ----------
    path : str or Path
        Comma-separated file; first row is the header.
    target_column : str or int
        Header name, or 0-based column index, of the target column.
    mode : str
        "classification" (targets must be -1/+1) or "regression".
    """
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if isinstance(target_column, int) or (
        isinstance(target_column, str) and target_column.lstrip("-").isdigit()
    ):
        idx = int(target_column)
        if not 0 <= idx < len(header):
            raise ValueError(
                f"{path}: target column index {idx} out of range for {len(header)} columns"
            )
    else:
        try:
            idx = header.index(target_column)
        except ValueError:
            raise ValueError(
                f"{path}: no column named {target_column!r} in header {header}"
            ) from None

    feature_names = tuple(h for j, h in enumerate(header) if j != idx)
    X_rows, y_vals = [], []
    for r, row in enumerate(rows[1:], start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue  # ignore blank lines
        if len(row) != len(header):
            raise ValueError(
                f"{path}: row {r} has {len(row)} cells, expected {len(header)}"
            )
        try:
            vals = [float(cell) for cell in row]
        except ValueError:
            bad = next(cell for cell in row if not _is_float(cell))
            raise ValueError(
                f"{path}: row {r} has non-numeric cell {bad!r}"
            ) from None
        y_vals.append(vals[idx])
        X_rows.append([v for j, v in enumerate(vals) if j != idx])
    if not X_rows:
        raise ValueError(f"{path}: no data rows")
    if mode == CLASSIFICATION:
        for r, v in enumerate(y_vals, start=2):
            if v not in (-1.0, 1.0):
                raise ValueError(
                    f"{path}: row {r} has classification target {v!r}, expected -1 or +1"
                )
    return Dataset(np.array(X_rows), np.array(y_vals), feature_names, mode)


def _is_float(cell):
    try:
        float(cell)
        return True
    except ValueError:
        return False


def expand_powers(X, degree):
    """Componentwise polynomial expansion x -> (x, x^2, ..., x^degree).

    Columns are ordered feature-major: all powers of feature 0, then all powers
    of feature 1, and so on. No cross terms. degree=1 returns the values unchanged.
    """
    if not isinstance(degree, (int, np.integer)) or degree < 1:
        raise ValueError(f"degree must be a positive integer, got {degree!r}")
    X = np.asarray(X, dtype=np.float64)
    if degree == 1:
        return X.copy()
    T, n = X.shape
    out = np.empty((T, n * degree), dtype=np.float64)
    for i in range(n):
        col = X[:, i]
        acc = np.ones_like(col)
        for k in range(degree):
            acc = acc * col
            out[:, i * degree + k] = acc
    return out


def power_feature_names(names, degree):
    """Expanded column names matching :func:`expand_powers` ordering."""
    if degree == 1:
        return tuple(names)
    out = []
    for name in names:
        out.append(str(name))
        out.extend(f"{name}^{k}" for k in range(2, degree + 1))
    return tuple(out)


def polynomial_expand(data, degree):
    """Return a new :class:`Dataset` with componentwise power features."""
    return Dataset(
        expand_powers(data.examples, degree),
        data.targets,
        power_feature_names(data.feature_names, degree),
        data.mode,
    )


def fit_scaling(X):
    """Fit per-feature standardization (population std, ddof=0).

    Constant columns keep scale 1 so scaling is always invertible; they are
    flagged in the returned ``constant_mask``.
    """
    X = np.asarray(X, dtype=np.float64)
    shift = X.mean(axis=0)
    scale = X.std(axis=0)
    constant = scale == 0.0
    scale = np.where(constant, 1.0, scale)
    return ScalingParams(shift, scale, constant)


def standardize(data):
    """Standardize a dataset's features; returns ``(scaled_dataset, params)``."""
    params = fit_scaling(data.examples)
    return (
        Dataset(
            params.apply(data.examples), data.targets, data.feature_names, data.mode
        ),
        params,
    )


def sinc(x):
    """sin|x| / |x| with the limit value 1 at x = 0."""
    x = np.asarray(x, dtype=np.float64)
    ax = np.abs(x)
    out = np.ones_like(ax)
    nz = ax > 0
    out[nz] = np.sin(ax[nz]) / ax[nz]
    return out


def gen_sinc(count=100, noise_std=0.2, seed=0):
    """Noisy sinc regression sample: x uniform on [-10, 10], Gaussian noise."""
    if count < 1:
        raise ValueError("count must be positive")
    if noise_std < 0:
        raise ValueError("noise_std must be nonnegative")
    rng = np.random.default_rng(seed)
    x = rng.uniform(-10.0, 10.0, count)
    y = sinc(x) + noise_std * rng.standard_normal(count)
    return Dataset(x[:, None], y, ("x",), REGRESSION)


class SparseBinaryProblem(NamedTuple):
    train: Dataset
    test: Dataset
    informative: tuple


def gen_sparse_binary(
    train_count=500,
    test_count=4724,
    n_features=100,
    n_informative=10,
    seed=0,
    flip_fraction=0.03,
):
    """Planted sparse binary-classification problem.

    Features are iid Bernoulli(1/2) in {0, 1}. A hidden rule puts signed unit
    weights on ``n_informative`` feature indices; the label is the sign of the
    centered planted score. Rows whose planted score has magnitude below 1 are
    rejection-sampled away, so every kept row carries signal from the hidden
    rule; ``flip_fraction`` of the labels are then flipped. The planted
    indices are returned as metadata.
    """
    if not 1 <= n_informative <= n_features:
        raise ValueError("n_informative must be in [1, n_features]")
    if train_count < 1 or test_count < 1:
        raise ValueError("split sizes must be positive")
    if not 0.0 <= flip_fraction < 0.5:
        raise ValueError("flip_fraction must lie in [0, 0.5)")
    rng = np.random.default_rng(seed)
    informative = np.sort(rng.choice(n_features, size=n_informative, replace=False))
    weights = np.zeros(n_features)
    weights[informative] = rng.choice((-1.0, 1.0), size=n_informative)
    names = tuple(f"f{i}" for i in range(n_features))

    def draw(count):
        rows = []
        kept = 0
        while kept < count:
            X = rng.integers(0, 2, size=(2 * count, n_features)).astype(np.float64)
            score = (X - 0.5) @ weights
            keep = np.abs(score) >= 1.0
            rows.append(X[keep])
            kept += int(keep.sum())
        X = np.concatenate(rows)[:count]
        score = (X - 0.5) @ weights
        y = np.where(score >= 0.0, 1.0, -1.0)
        flip = rng.random(count) < flip_fraction
        y[flip] = -y[flip]
        return Dataset(X, y, names, CLASSIFICATION)

    train = draw(train_count)
    test = draw(test_count)
    return SparseBinaryProblem(train, test, tuple(int(i) for i in informative))
