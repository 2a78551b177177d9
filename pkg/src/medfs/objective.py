"""Concave dual objectives for maximum entropy discrimination.

Four variants are provided, all maximized over box-constrained dual variables:
plain classification, classification with feature selection, plain regression
(epsilon-tube), and regression with feature selection. Selection variants place
a Bernoulli(p0) switch prior on each feature, which turns the usual quadratic
kernel term into a sum of log switch-partition terms, one per feature.

Bias handling is either "soft" (a quadratic penalty on the bias-feasibility sum
folded into the objective) or "hard" (an exact equality constraint the optimizer
must preserve; evaluation rejects infeasible points).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from types import SimpleNamespace
from typing import NamedTuple

import numpy as np
from scipy.special import expit

CLASSIFICATION = "classification"
REGRESSION = "regression"
VARIANT_SVM = "svm"
VARIANT_FS = "fs"

# The margin-penalty barrier diverges at lam = c. Optimizers work on the
# strict box [0, c - BOX_DELTA_FRACTION * c] so every evaluation is finite.
BOX_DELTA_FRACTION = 1e-12

_FEAS_TOL = 1e-8


class BoxViolationError(ValueError):
    """Dual variables outside the feasible box (or barrier domain)."""


class FeasibilityError(ValueError):
    """Hard-mode equality constraint violated."""


class SurrogateError(RuntimeError):
    """Numerical breakdown while assembling or solving a quadratic surrogate."""


@dataclass(frozen=True)
class Hyperparams:
    """Model hyperparameters shared by all objective variants.

    c is the margin-penalty scale (barrier location), epsilon the regression
    tube half-width, p0 the prior switch probability for feature selection,
    sigma the soft-bias prior scale, variant one of "svm"/"fs", and bias_mode
    one of "soft"/"hard".
    """

    c: float = 10.0
    epsilon: float = 0.2
    p0: float = 0.99999
    sigma: float = 10.0
    variant: str = VARIANT_FS
    bias_mode: str = "soft"

    def __post_init__(self):
        if not (np.isfinite(self.c) and self.c > 0):
            raise ValueError(f"c must be positive and finite, got {self.c!r}")
        if not (np.isfinite(self.epsilon) and self.epsilon >= 0):
            raise ValueError(f"epsilon must be nonnegative, got {self.epsilon!r}")
        if not (0.0 < self.p0 < 1.0):
            raise ValueError(f"p0 must lie strictly inside (0, 1), got {self.p0!r}")
        if not (np.isfinite(self.sigma) and self.sigma > 0):
            raise ValueError(f"sigma must be positive, got {self.sigma!r}")
        if self.variant not in (VARIANT_SVM, VARIANT_FS):
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.bias_mode not in ("soft", "hard"):
            raise ValueError(f"unknown bias_mode {self.bias_mode!r}")


class ObjectiveEval(NamedTuple):
    value: float
    gradient: np.ndarray


def _as_duals(lam):
    lam = np.asarray(lam, dtype=np.float64)
    if lam.ndim != 1:
        raise ValueError("dual variables must form a 1-D vector")
    return lam


def _check_barrier_domain(lam, c):
    if np.any(lam < 0) or np.any(lam >= c):
        t = int(np.flatnonzero((lam < 0) | (lam >= c))[0])
        raise BoxViolationError(
            f"dual {t} = {lam[t]!r} outside the barrier domain [0, {c})"
        )


def classification_margin_penalty(lam, c):
    """Per-example additive term lam + log(1 - lam/c) of the classification dual.

    Equals minus the log-partition of the margin prior; quadrature-verified.
    Scalar or vector lam; requires 0 <= lam < c.
    """
    lam = np.asarray(lam, dtype=np.float64)
    _check_barrier_domain(lam, c)
    return lam + np.log1p(-lam / c)


def classification_margin_penalty_deriv(lam, c):
    """Derivative 1 - 1/(c - lam) of :func:`classification_margin_penalty`."""
    lam = np.asarray(lam, dtype=np.float64)
    _check_barrier_domain(lam, c)
    return 1.0 - 1.0 / (c - lam)


def _phi(u):
    # (1 - exp(-u))/u with the limit 1 at u = 0; accurate for all u >= 0.
    u = np.asarray(u, dtype=np.float64)
    safe = np.where(u == 0.0, 1.0, u)
    return np.where(u == 0.0, 1.0, -np.expm1(-safe) / safe)


def _phi_deriv(u):
    # d/du of _phi. The direct form cancels near 0, so use its series there.
    u = np.asarray(u, dtype=np.float64)
    small = u < 1e-2
    safe = np.where(small, 1.0, u)
    direct = (np.exp(-safe) * (1.0 + safe) - 1.0) / (safe * safe)
    series = -0.5 + u / 3.0 - u * u / 8.0 + u**3 / 30.0
    return np.where(small, series, direct)


def regression_margin_penalty(lam, c, epsilon):
    """Log-partition of the regression margin prior.

    Evaluated as the fused expression lam*eps + log(eps*phi(lam*eps) + 1/(c-lam))
    with phi(u) = (1-exp(-u))/u, which equals
    eps*lam - log(lam) + log(1 - exp(-lam*eps) + lam/(c-lam)) for lam > 0 and
    extends continuously to log(eps + 1/c) at lam = 0. Quadrature-verified.
    """
    lam = np.asarray(lam, dtype=np.float64)
    _check_barrier_domain(lam, c)
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    u = lam * epsilon
    return u + np.log(epsilon * _phi(u) + 1.0 / (c - lam))


def regression_margin_penalty_deriv(lam, c, epsilon):
    """Derivative of :func:`regression_margin_penalty` with respect to lam."""
    lam = np.asarray(lam, dtype=np.float64)
    _check_barrier_domain(lam, c)
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    u = lam * epsilon
    g = epsilon * _phi(u) + 1.0 / (c - lam)
    gprime = epsilon * epsilon * _phi_deriv(u) + 1.0 / (c - lam) ** 2
    return epsilon + gprime / g


def classification_margin_penalty_curv(lam, c):
    """Negated second derivative 1/(c - lam)^2; positive on the whole box."""
    lam = np.asarray(lam, dtype=np.float64)
    _check_barrier_domain(lam, c)
    return 1.0 / (c - lam) ** 2


def _phi_curv(u):
    # d^2/du^2 of _phi; series below 1e-2 where the direct form cancels.
    u = np.asarray(u, dtype=np.float64)
    small = u < 1e-2
    safe = np.where(small, 1.0, u)
    direct = (2.0 - np.exp(-safe) * (safe * safe + 2.0 * safe + 2.0)) / safe**3
    series = 1.0 / 3.0 - u / 4.0 + u * u / 10.0 - u**3 / 36.0
    return np.where(small, series, direct)


def regression_margin_penalty_curv(lam, c, epsilon):
    """Second derivative of :func:`regression_margin_penalty` (nonnegative)."""
    lam = np.asarray(lam, dtype=np.float64)
    _check_barrier_domain(lam, c)
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    u = lam * epsilon
    g = epsilon * _phi(u) + 1.0 / (c - lam)
    gprime = epsilon * epsilon * _phi_deriv(u) + 1.0 / (c - lam) ** 2
    gsecond = epsilon**3 * _phi_curv(u) + 2.0 / (c - lam) ** 3
    r = gprime / g
    return gsecond / g - r * r


def _logit(p0):
    # log(p0 / (1 - p0)) without losing precision near either end.
    return math.log(p0) - math.log1p(-p0)


def feature_inclusion_prob(w, p0):
    """Posterior switch probability as reported: Logistic[w^2 + log(p0/(1-p0))].

    w is the aggregated discriminant weight of one feature (scalar or vector).
    At |w| = sqrt(log((1-p0)/p0)) the probability crosses 1/2.
    """
    if not (0.0 < p0 < 1.0):
        raise ValueError(f"p0 must lie strictly inside (0, 1), got {p0!r}")
    w = np.asarray(w, dtype=np.float64)
    return expit(w * w + _logit(p0))


def _switch_logsum(w, p0):
    # (1/2) log(1 - p0 + p0 * exp(w^2)), elementwise, overflow-safe. The
    # half-log form is fixed by requiring d/dw = feature_inclusion_prob(w) * w,
    # so the objective, its gradient, and the reported probabilities all use
    # one switch posterior.
    w = np.asarray(w, dtype=np.float64)
    return 0.5 * np.logaddexp(math.log1p(-p0), math.log(p0) + w * w)


def _switch_weight(w, p0):
    # Derivative weight of _switch_logsum: d/dw [_switch_logsum] = weight * w.
    # Identical to feature_inclusion_prob; kept separate for the hot paths.
    w = np.asarray(w, dtype=np.float64)
    return expit(w * w + _logit(p0))


def stack_duals(lam, lam_prime):
    """Stack the two regression multiplier groups into one vector."""
    return np.concatenate([np.asarray(lam, float), np.asarray(lam_prime, float)])


def split_duals(z):
    """Inverse of :func:`stack_duals`."""
    z = _as_duals(z)
    if z.shape[0] % 2:
        raise ValueError("stacked regression duals must have even length")
    half = z.shape[0] // 2
    return z[:half].copy(), z[half:].copy()


class _DualObjective:
    """Shared plumbing for the four dual objectives.

    Subclasses define the smooth part; this base provides validation, the
    strict box, equality metadata, and default initialization. Instances are
    immutable once built and safe to share across optimizer runs.
    """

    task = None

    def __init__(self, X, y, hyper):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64).ravel()
        if X.ndim != 2:
            raise ValueError("X must be 2-D")
        if X.shape[0] != y.shape[0]:
            raise ValueError("X and y disagree on the number of examples")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise ValueError("X and y must be finite")
        if not isinstance(hyper, Hyperparams):
            raise TypeError("hyper must be a Hyperparams instance")
        self.X = X
        self.y = y
        self.hyper = hyper
        self.box_hi = hyper.c * (1.0 - BOX_DELTA_FRACTION)
        self.soft = hyper.bias_mode == "soft"

    # -- contracts ---------------------------------------------------------

    @property
    def n_examples(self):
        return self.X.shape[0]

    @property
    def n_features(self):
        return self.X.shape[1]

    def check_duals(self, z):
        z = _as_duals(z)
        if z.shape[0] != self.n_duals:
            raise ValueError(f"expected {self.n_duals} duals, got {z.shape[0]}")
        if np.any(z < 0.0) or np.any(z > self.box_hi):
            t = int(np.flatnonzero((z < 0.0) | (z > self.box_hi))[0])
            raise BoxViolationError(
                f"dual {t} = {z[t]!r} outside the box [0, {self.box_hi!r}]"
            )
        if not self.soft:
            resid = float(self.equality @ z)
            if abs(resid) > _FEAS_TOL * max(1.0, float(np.abs(z).sum())):
                raise FeasibilityError(
                    f"hard bias mode requires the equality constraint to hold; "
                    f"residual {resid!r}"
                )
        return z

    def default_init(self):
        """Spec default start: constant min(0.1, c/10), balanced when hard."""
        base = min(0.1, self.hyper.c / 10.0)
        z = np.full(self.n_duals, base)
        if not self.soft:
            a = self.equality
            pos = a > 0
            npos, nneg = int(pos.sum()), int((~pos).sum())
            if npos == 0 or nneg == 0:
                return np.zeros(self.n_duals)
            m = max(npos, nneg)
            z = np.where(pos, base * nneg / m, base * npos / m)
        return z

    def value(self, z):
        raise NotImplementedError

    def value_and_grad(self, z):
        raise NotImplementedError

    def evaluate(self, z):
        """Value and gradient bundled, for callers that want the pair."""
        return ObjectiveEval(*self.value_and_grad(z))


def _pen_clf_scalar(x, c):
    return x + math.log1p(-x / c)


def _pen_reg_scalar(x, c, eps):
    u = x * eps
    p = 1.0 if u == 0.0 else -math.expm1(-u) / u
    return u + math.log(eps * p + 1.0 / (c - x))


class SvmClassificationDual(_DualObjective):
    """Plain classification dual: margin penalties minus the kernel quadratic."""

    task = CLASSIFICATION

    def __init__(self, X, y, hyper):
        super().__init__(X, y, hyper)
        if not np.all(np.isin(self.y, (-1.0, 1.0))):
            raise ValueError("classification targets must be -1 or +1")
        self.A = self.y[:, None] * self.X  # rows y_t * x_t
        self.K = self.A @ self.A.T
        self._diag = np.diag(self.K).copy()
        self._sig2 = hyper.sigma**2 if self.soft else 0.0
        self.equality = None if self.soft else self.y.copy()

    @property
    def n_duals(self):
        return self.n_examples

    def value(self, z):
        z = self.check_duals(z)
        pen = classification_margin_penalty(z, self.hyper.c).sum()
        quad = 0.5 * z @ self.K @ z
        out = pen - quad
        if self.soft:
            out -= 0.5 * self._sig2 * float(self.y @ z) ** 2
        return float(out)

    def value_and_grad(self, z):
        z = self.check_duals(z)
        kl = self.K @ z
        pen = classification_margin_penalty(z, self.hyper.c)
        grad = classification_margin_penalty_deriv(z, self.hyper.c) - kl
        val = pen.sum() - 0.5 * float(z @ kl)
        if self.soft:
            s = float(self.y @ z)
            val -= 0.5 * self._sig2 * s * s
            grad = grad - self._sig2 * s * self.y
        return float(val), grad

    # -- coordinate machinery for the axis-parallel search -----------------

    def new_state(self, z):
        z = self.check_duals(z).copy()
        return SimpleNamespace(lam=z, kl=self.K @ z, S=float(self.y @ z))

    def line_delta(self, state, t):
        c = self.hyper.c
        x0 = state.lam[t]
        a = self._diag[t] + self._sig2
        b = -(state.kl[t] + self._sig2 * state.S * self.y[t])
        pen0 = math.log1p(-x0 / c)

        def phi(d):
            return (b + 1.0) * d - 0.5 * a * d * d + math.log1p(-(x0 + d) / c) - pen0

        return -x0, self.box_hi - x0, phi

    def pair_delta(self, state, t, u):
        c = self.hyper.c
        f = -self.y[t] * self.y[u]
        x0, u0 = state.lam[t], state.lam[u]
        lo = -x0
        hi = self.box_hi - x0
        if f > 0:
            lo, hi = max(lo, -u0), min(hi, self.box_hi - u0)
        else:
            lo, hi = max(lo, u0 - self.box_hi), min(hi, u0)
        if lo >= hi:
            return None
        a = self._diag[t] + 2.0 * f * self.K[t, u] + self._diag[u]
        b = -(state.kl[t] + f * state.kl[u])
        pen_t0 = math.log1p(-x0 / c)
        pen_u0 = math.log1p(-u0 / c)

        def phi(d):
            fd = f * d
            return (
                (b + 1.0 + f) * d
                - 0.5 * a * d * d
                + math.log1p(-(x0 + d) / c)
                - pen_t0
                + math.log1p(-(u0 + fd) / c)
                - pen_u0
            )

        return lo, hi, phi

    def commit(self, state, t, d):
        state.lam[t] += d
        state.kl += d * self.K[:, t]
        state.S += d * self.y[t]

    def commit_pair(self, state, t, u, d):
        self.commit(state, t, d)
        self.commit(state, u, -self.y[t] * self.y[u] * d)

    # -- quadratic model for the bounded-QP optimizer -----------------------

    def quad_model(self, anchor):
        # Plain variant: the quadratic is exact, no bounding needed.
        A = self.K.copy()
        if self.soft:
            A += self._sig2 * np.outer(self.y, self.y)
        return A, np.zeros(self.n_duals)

    @property
    def scalar_penalty(self):
        return ("clf", self.hyper.c)


class FeatureSelectClassificationDual(SvmClassificationDual):
    """Classification dual with Bernoulli switch selection terms per feature."""

    def __init__(self, X, y, hyper):
        _DualObjective.__init__(self, X, y, hyper)
        if not np.all(np.isin(self.y, (-1.0, 1.0))):
            raise ValueError("classification targets must be -1 or +1")
        self.A = self.y[:, None] * self.X
        self._sig2 = hyper.sigma**2 if self.soft else 0.0
        self.equality = None if self.soft else self.y.copy()
        self._log1mp0 = math.log1p(-hyper.p0)
        self._logp0 = math.log(hyper.p0)

    def _switch_total(self, W):
        return 0.5 * float(np.logaddexp(self._log1mp0, self._logp0 + W * W).sum())

    def value(self, z):
        z = self.check_duals(z)
        pen = classification_margin_penalty(z, self.hyper.c).sum()
        W = self.A.T @ z
        out = pen - self._switch_total(W)
        if self.soft:
            out -= 0.5 * self._sig2 * float(self.y @ z) ** 2
        return float(out)

    def value_and_grad(self, z):
        z = self.check_duals(z)
        W = self.A.T @ z
        q = _switch_weight(W, self.hyper.p0)
        val = classification_margin_penalty(z, self.hyper.c).sum()
        val -= self._switch_total(W)
        grad = classification_margin_penalty_deriv(z, self.hyper.c) - self.A @ (q * W)
        if self.soft:
            s = float(self.y @ z)
            val -= 0.5 * self._sig2 * s * s
            grad = grad - self._sig2 * s * self.y
        return float(val), grad

    def new_state(self, z):
        z = self.check_duals(z).copy()
        W = self.A.T @ z
        return SimpleNamespace(
            lam=z, W=W, F=self._switch_total(W), S=float(self.y @ z)
        )

    def line_delta(self, state, t):
        c = self.hyper.c
        x0 = state.lam[t]
        row = self.A[t]
        a = self._sig2
        b = -self._sig2 * state.S * self.y[t]
        pen0 = math.log1p(-x0 / c)
        W, F0 = state.W, state.F

        def phi(d):
            F = self._switch_total(W + d * row)
            return (
                (b + 1.0) * d
                - 0.5 * a * d * d
                + math.log1p(-(x0 + d) / c)
                - pen0
                - (F - F0)
            )

        return -x0, self.box_hi - x0, phi

    def pair_delta(self, state, t, u):
        c = self.hyper.c
        f = -self.y[t] * self.y[u]
        x0, u0 = state.lam[t], state.lam[u]
        lo, hi = -x0, self.box_hi - x0
        if f > 0:
            lo, hi = max(lo, -u0), min(hi, self.box_hi - u0)
        else:
            lo, hi = max(lo, u0 - self.box_hi), min(hi, u0)
        if lo >= hi:
            return None
        row = self.A[t] + f * self.A[u]
        pen_t0 = math.log1p(-x0 / c)
        pen_u0 = math.log1p(-u0 / c)
        W, F0 = state.W, state.F

        def phi(d):
            fd = f * d
            F = self._switch_total(W + d * row)
            return (
                (1.0 + f) * d
                + math.log1p(-(x0 + d) / c)
                - pen_t0
                + math.log1p(-(u0 + fd) / c)
                - pen_u0
                - (F - F0)
            )

        return lo, hi, phi

    def commit(self, state, t, d):
        state.lam[t] += d
        state.W = state.W + d * self.A[t]
        state.F = self._switch_total(state.W)
        state.S += d * self.y[t]

    def commit_pair(self, state, t, u, d):
        f = -self.y[t] * self.y[u]
        state.lam[t] += d
        state.lam[u] += f * d
        state.W = state.W + d * (self.A[t] + f * self.A[u])
        state.F = self._switch_total(state.W)
        state.S += d * (self.y[t] + f * self.y[u])

    def switch_vectors(self):
        """Columns are the per-feature linear maps w_i = v_i @ duals."""
        return self.A

    def quad_model(self, anchor):
        # Variational lower bound of the switch terms, tangent at the anchor.
        # Per feature: curvature (1 + w~^2/2) v v', linear (w~^2/2 + h) w~ v.
        anchor = self.check_duals(anchor)
        V = self.A
        w = V.T @ anchor
        h = expit(-(w * w + _logit(self.hyper.p0)))
        A = (V * (1.0 + 0.5 * w * w)) @ V.T
        blin = V @ ((0.5 * w * w + h) * w)
        if self.soft:
            A = A + self._sig2 * np.outer(self.y, self.y)
        return A, blin


class SvmRegressionDual(_DualObjective):
    """Epsilon-tube regression dual over stacked multipliers [lam, lam_prime].

    lam pushes predictions up, lam_prime pulls them down; the prediction
    weights are X' @ (lam - lam_prime).
    """

    task = REGRESSION

    def __init__(self, X, y, hyper):
        super().__init__(X, y, hyper)
        self.K = self.X @ self.X.T
        self._diag = np.diag(self.K).copy()
        self._sig = hyper.sigma if self.soft else 0.0
        T = self.n_examples
        self.equality = (
            None
            if self.soft
            else np.concatenate([np.ones(T), -np.ones(T)])
        )

    @property
    def n_duals(self):
        return 2 * self.n_examples

    def _pen_total(self, z):
        return float(
            regression_margin_penalty(z, self.hyper.c, self.hyper.epsilon).sum()
        )

    def value(self, z):
        z = self.check_duals(z)
        lam, lamp = np.split(z, 2)
        delta = lam - lamp
        out = float(self.y @ delta) - self._pen_total(z)
        out -= 0.5 * float(delta @ self.K @ delta)
        if self.soft:
            out -= 0.5 * self._sig * float(delta.sum()) ** 2
        return float(out)

    def value_and_grad(self, z):
        z = self.check_duals(z)
        lam, lamp = np.split(z, 2)
        delta = lam - lamp
        q = self.K @ delta
        pend = regression_margin_penalty_deriv(z, self.hyper.c, self.hyper.epsilon)
        val = float(self.y @ delta) - self._pen_total(z) - 0.5 * float(delta @ q)
        g_lam = self.y - q
        g_lamp = -self.y + q
        if self.soft:
            D = float(delta.sum())
            val -= 0.5 * self._sig * D * D
            g_lam = g_lam - self._sig * D
            g_lamp = g_lamp + self._sig * D
        grad = np.concatenate([g_lam, g_lamp]) - pend
        return float(val), grad

    # Coordinate indexing: j < T refers to lam[j], j >= T to lam_prime[j - T].

    def _split_index(self, j):
        T = self.n_examples
        return (j, 1.0) if j < T else (j - T, -1.0)

    def new_state(self, z):
        z = self.check_duals(z).copy()
        lam, lamp = np.split(z, 2)
        delta = lam - lamp
        return SimpleNamespace(lam=z, q=self.K @ delta, D=float(delta.sum()))

    def line_delta(self, state, j):
        t, s = self._split_index(j)
        x0 = state.lam[j]
        a = self._diag[t] + self._sig
        b = s * (self.y[t] - state.q[t] - self._sig * state.D)
        c, eps = self.hyper.c, self.hyper.epsilon
        pen0 = _pen_reg_scalar(x0, c, eps)

        def phi(d):
            return b * d - 0.5 * a * d * d - (_pen_reg_scalar(x0 + d, c, eps) - pen0)

        return -x0, self.box_hi - x0, phi

    def pair_delta(self, state, j, k):
        tj, sj = self._split_index(j)
        tk, sk = self._split_index(k)
        f = -sj * sk * 1.0  # preserves sum(lam) - sum(lam')
        x0, u0 = state.lam[j], state.lam[k]
        lo, hi = -x0, self.box_hi - x0
        if f > 0:
            lo, hi = max(lo, -u0), min(hi, self.box_hi - u0)
        else:
            lo, hi = max(lo, u0 - self.box_hi), min(hi, u0)
        if lo >= hi:
            return None
        a = self._diag[tj] + 2.0 * f * sj * sk * self.K[tj, tk] + self._diag[tk]
        b = (
            sj * (self.y[tj] - state.q[tj])
            + f * sk * (self.y[tk] - state.q[tk])
        )
        c, eps = self.hyper.c, self.hyper.epsilon
        pen_j0 = _pen_reg_scalar(x0, c, eps)
        pen_k0 = _pen_reg_scalar(u0, c, eps)

        def phi(d):
            fd = f * d
            return (
                b * d
                - 0.5 * a * d * d
                - (_pen_reg_scalar(x0 + d, c, eps) - pen_j0)
                - (_pen_reg_scalar(u0 + fd, c, eps) - pen_k0)
            )

        return lo, hi, phi

    def commit(self, state, j, d):
        t, s = self._split_index(j)
        state.lam[j] += d
        state.q += (s * d) * self.K[:, t]
        state.D += s * d

    def commit_pair(self, state, j, k, d):
        _, sj = self._split_index(j)
        _, sk = self._split_index(k)
        f = -sj * sk
        self.commit(state, j, d)
        self.commit(state, k, f * d)

    def quad_model(self, anchor):
        T = self.n_examples
        G = np.block([[self.K, -self.K], [-self.K, self.K]])
        if self.soft:
            a = np.concatenate([np.ones(T), -np.ones(T)])
            G = G + self._sig * np.outer(a, a)
        blin = np.concatenate([self.y, -self.y])
        return G, blin

    @property
    def scalar_penalty(self):
        return ("reg", self.hyper.c, self.hyper.epsilon)


class FeatureSelectRegressionDual(SvmRegressionDual):
    """Regression dual with Bernoulli switch selection terms per feature."""

    def __init__(self, X, y, hyper):
        _DualObjective.__init__(self, X, y, hyper)
        self._sig = hyper.sigma if self.soft else 0.0
        T = self.n_examples
        self.equality = (
            None
            if self.soft
            else np.concatenate([np.ones(T), -np.ones(T)])
        )
        self._log1mp0 = math.log1p(-hyper.p0)
        self._logp0 = math.log(hyper.p0)

    def _switch_total(self, W):
        return 0.5 * float(np.logaddexp(self._log1mp0, self._logp0 + W * W).sum())

    def value(self, z):
        z = self.check_duals(z)
        lam, lamp = np.split(z, 2)
        delta = lam - lamp
        W = self.X.T @ delta
        out = float(self.y @ delta) - self._pen_total(z) - self._switch_total(W)
        if self.soft:
            out -= 0.5 * self._sig * float(delta.sum()) ** 2
        return float(out)

    def value_and_grad(self, z):
        z = self.check_duals(z)
        lam, lamp = np.split(z, 2)
        delta = lam - lamp
        W = self.X.T @ delta
        q = _switch_weight(W, self.hyper.p0)
        xw = self.X @ (q * W)
        pend = regression_margin_penalty_deriv(z, self.hyper.c, self.hyper.epsilon)
        val = float(self.y @ delta) - self._pen_total(z) - self._switch_total(W)
        g_lam = self.y - xw
        g_lamp = -self.y + xw
        if self.soft:
            D = float(delta.sum())
            val -= 0.5 * self._sig * D * D
            g_lam = g_lam - self._sig * D
            g_lamp = g_lamp + self._sig * D
        grad = np.concatenate([g_lam, g_lamp]) - pend
        return float(val), grad

    def new_state(self, z):
        z = self.check_duals(z).copy()
        lam, lamp = np.split(z, 2)
        delta = lam - lamp
        W = self.X.T @ delta
        return SimpleNamespace(
            lam=z, W=W, F=self._switch_total(W), D=float(delta.sum())
        )

    def line_delta(self, state, j):
        t, s = self._split_index(j)
        x0 = state.lam[j]
        a = self._sig
        b = s * (self.y[t] - self._sig * state.D)
        c, eps = self.hyper.c, self.hyper.epsilon
        pen0 = _pen_reg_scalar(x0, c, eps)
        row = s * self.X[t]
        W, F0 = state.W, state.F

        def phi(d):
            F = self._switch_total(W + d * row)
            return (
                b * d
                - 0.5 * a * d * d
                - (_pen_reg_scalar(x0 + d, c, eps) - pen0)
                - (F - F0)
            )

        return -x0, self.box_hi - x0, phi

    def pair_delta(self, state, j, k):
        tj, sj = self._split_index(j)
        tk, sk = self._split_index(k)
        f = -sj * sk * 1.0
        x0, u0 = state.lam[j], state.lam[k]
        lo, hi = -x0, self.box_hi - x0
        if f > 0:
            lo, hi = max(lo, -u0), min(hi, self.box_hi - u0)
        else:
            lo, hi = max(lo, u0 - self.box_hi), min(hi, u0)
        if lo >= hi:
            return None
        b = sj * self.y[tj] + f * sk * self.y[tk]
        c, eps = self.hyper.c, self.hyper.epsilon
        pen_j0 = _pen_reg_scalar(x0, c, eps)
        pen_k0 = _pen_reg_scalar(u0, c, eps)
        row = sj * self.X[tj] + f * sk * self.X[tk]
        W, F0 = state.W, state.F

        def phi(d):
            fd = f * d
            F = self._switch_total(W + d * row)
            return (
                b * d
                - (_pen_reg_scalar(x0 + d, c, eps) - pen_j0)
                - (_pen_reg_scalar(u0 + fd, c, eps) - pen_k0)
                - (F - F0)
            )

        return lo, hi, phi

    def commit(self, state, j, d):
        t, s = self._split_index(j)
        state.lam[j] += d
        state.W = state.W + (s * d) * self.X[t]
        state.F = self._switch_total(state.W)
        state.D += s * d

    def commit_pair(self, state, j, k, d):
        tj, sj = self._split_index(j)
        tk, sk = self._split_index(k)
        f = -sj * sk
        state.lam[j] += d
        state.lam[k] += f * d
        state.W = state.W + d * (sj * self.X[tj] + f * sk * self.X[tk])
        state.F = self._switch_total(state.W)
        state.D += d * (sj + f * sk)

    def switch_vectors(self):
        return np.vstack([self.X, -self.X])

    def quad_model(self, anchor):
        anchor = self.check_duals(anchor)
        T = self.n_examples
        V = np.vstack([self.X, -self.X])
        w = V.T @ anchor
        h = expit(-(w * w + _logit(self.hyper.p0)))
        A = (V * (1.0 + 0.5 * w * w)) @ V.T
        blin = np.concatenate([self.y, -self.y]) + V @ ((0.5 * w * w + h) * w)
        if self.soft:
            a = np.concatenate([np.ones(T), -np.ones(T)])
            A = A + self._sig * np.outer(a, a)
        return A, blin


def build_objective(task, X, y, hyper):
    """Construct the dual objective for a task ("classification"/"regression")."""
    if task == CLASSIFICATION:
        cls = (
            SvmClassificationDual
            if hyper.variant == VARIANT_SVM
            else FeatureSelectClassificationDual
        )
    elif task == REGRESSION:
        cls = (
            SvmRegressionDual
            if hyper.variant == VARIANT_SVM
            else FeatureSelectRegressionDual
        )
    else:
        raise ValueError(f"unknown task {task!r}")
    return cls(X, y, hyper)
