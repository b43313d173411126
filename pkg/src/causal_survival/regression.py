"""Weighted logistic and Cox proportional-hazards regression by Newton-Raphson.

Both fitters standardize the non-constant design columns internally and map
the estimates back to the natural scale before returning. Ties in the Cox
partial likelihood follow Breslow: every event tied at ``t_j`` shares the
risk-set denominator of ``t_j``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _kernels
from .errors import ConvergenceError, EstimationError, InputError, SeparationError, SingularMatrixError
from .survival_core import SurvivalDataset

__all__ = [
    "FittedLogistic",
    "FittedCox",
    "fit_logistic",
    "predict_ps",
    "logistic_loglik",
    "fit_cox",
    "predict_cumhaz",
    "cox_partial_loglik",
    "cox_design",
]

TOL = 1e-8
MAX_ITER = 100
MAX_HALVINGS = 40
# |coef| on the standardized scale beyond which the MLE is treated as infinite
DIVERGENCE_BOUND = 30.0


@dataclass(frozen=True)
class FittedLogistic:
    intercept: float
    coefficients: np.ndarray
    converged: bool
    iterations: int
    log_likelihood: float

    @property
    def params(self) -> np.ndarray:
        return np.concatenate(([self.intercept], self.coefficients))


@dataclass(frozen=True)
class FittedCox:
    """Cox fit: ``coefficients`` is ``(gamma, beta...)`` when the exposure is included.

    ``baseline_times``/``baseline_cumhaz`` hold the Breslow cumulative baseline
    hazard, a right-continuous step function jumping at each distinct event time.
    """

    coefficients: np.ndarray
    baseline_times: np.ndarray
    baseline_cumhaz: np.ndarray
    converged: bool
    iterations: int
    partial_log_likelihood: float
    include_exposure: bool = True
    covariate_subset: tuple[int, ...] = ()

    @property
    def gamma(self) -> float:
        if not self.include_exposure:
            raise AttributeError("model was fitted without the exposure term")
        return float(self.coefficients[0])

    @property
    def beta(self) -> np.ndarray:
        return self.coefficients[1:] if self.include_exposure else self.coefficients

    def cumhaz(self, t):
        """Baseline cumulative hazard ``H0(t)``; zero before the first event."""
        idx = np.searchsorted(self.baseline_times, np.asarray(t, dtype=float), side="right")
        out = np.concatenate(([0.0], self.baseline_cumhaz))[idx]
        return out if out.ndim else float(out)


def _check_weights(weights, n):
    if weights is None:
        return np.ones(n)
    w = np.asarray(weights, dtype=float)
    if w.shape != (n,):
        raise InputError(f"weights must have length {n}")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise InputError("weights must be finite and non-negative")
    return w


def _standardize(X):
    """Center/scale columns; constant columns are left untouched."""
    center = X.mean(axis=0)
    scale = X.std(axis=0)
    constant = scale < 1e-12 * np.maximum(1.0, np.abs(center))
    center = np.where(constant, 0.0, center)
    scale = np.where(constant, 1.0, scale)
    return (X - center) / scale, center, scale


_EMPTY_F = np.zeros(0)
_EMPTY_I = np.zeros(0, dtype=np.int64)


def _newton(kind, X, y, w, wd, block_start, block_end, x0, tol, max_iter, grad_scale, bound_from, what):
    """Run the compiled Newton loop and translate its status into exceptions.

    Convergence needs both the step and ``gradient / grad_scale`` below ``tol``
    in max-norm; ``grad_scale`` is the total weight of the likelihood terms so
    the test does not tighten with sample size past floating-point resolution.
    """
    x, value, iterations, status = _kernels._newton_loop(
        kind, X, y, w, wd, block_start, block_end, np.ascontiguousarray(x0, dtype=float),
        float(tol), int(max_iter), max(1.0, float(grad_scale)), DIVERGENCE_BOUND, bound_from)
    if status == _kernels.SINGULAR:
        raise SingularMatrixError(f"{what}: information matrix is singular")
    if status == _kernels.DIVERGED:
        if kind == 1:
            raise SeparationError("separation detected")
        raise EstimationError(f"{what}: coefficients diverging (monotone likelihood)")
    if status == _kernels.STALLED:
        raise ConvergenceError(f"{what}: step-halving failed to increase the likelihood", x, iterations)
    if status == _kernels.MAX_ITER:
        raise ConvergenceError(f"{what} did not converge in {max_iter} iterations", x, iterations)
    return x, float(value), int(iterations)


# ----------------------------------------------------------------------------
# logistic regression


def logistic_loglik(X, y, params, weights=None):
    """Weighted Bernoulli log-likelihood, its gradient and the information matrix."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    w = _check_weights(weights, X.shape[0])
    eta = X @ params
    mu = np.exp(-np.logaddexp(0.0, -eta))
    value = float(np.dot(w, y * eta - np.logaddexp(0.0, eta)))
    grad = X.T @ (w * (y - mu))
    info = (X * (w * mu * (1.0 - mu))[:, None]).T @ X
    return value, grad, info


def fit_logistic(X, y, weights=None, *, tol: float = TOL, max_iter: int = MAX_ITER) -> FittedLogistic:
    """Maximum-likelihood logistic regression.

    ``X`` is the ``n x (p+1)`` design whose first column is the intercept.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise InputError("X must be 2-D with one row per outcome")
    if not np.all(np.isin(y, (0.0, 1.0))):
        raise InputError("y must be binary")
    n, k = X.shape
    if n <= k:
        raise InputError("need more observations than parameters")
    w = _check_weights(weights, n)

    Z, center, scale = _standardize(X[:, 1:])
    design = np.column_stack((np.ones(n), Z))
    ybar = np.dot(w, y) / w.sum()
    if ybar <= 0 or ybar >= 1:
        raise SeparationError("separation detected: outcome is constant")
    x0 = np.zeros(k)
    x0[0] = np.log(ybar / (1 - ybar))

    design = np.ascontiguousarray(design)
    try:
        b, value, iterations = _newton(1, design, y, w, _EMPTY_F, _EMPTY_I, _EMPTY_I,
                                       x0, tol, max_iter, w.sum(), 1, "logistic regression")
    except SingularMatrixError:
        # full-rank design: the information collapsed because fitted probabilities hit 0 or 1
        if np.linalg.matrix_rank(design[w > 0]) == k:
            raise SeparationError("separation detected: fitted probabilities reached 0 or 1") from None
        raise
    slopes = b[1:] / scale
    intercept = b[0] - np.dot(slopes, center)
    return FittedLogistic(float(intercept), slopes, True, iterations, value)


def predict_ps(fit: FittedLogistic, X) -> np.ndarray:
    """Inverse-logit of the linear predictor for an ``n x (p+1)`` design."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != fit.coefficients.size + 1:
        raise InputError(f"design must have {fit.coefficients.size + 1} columns")
    eta = X @ fit.params
    return np.exp(-np.logaddexp(0.0, -eta))


# ----------------------------------------------------------------------------
# Cox regression


def cox_design(data: SurvivalDataset, include_exposure: bool, covariate_subset: Sequence[int]) -> np.ndarray:
    cols = [data.exposure.astype(float)[:, None]] if include_exposure else []
    subset = list(covariate_subset)
    if subset:
        if min(subset) < 0 or max(subset) >= data.p:
            raise InputError("covariate index out of range")
        cols.append(data.covariates[:, subset])
    return np.hstack(cols) if cols else np.empty((data.n, 0))


class _CoxProblem:
    """Sorted arrays and risk-set bookkeeping shared by every Newton iterate."""

    def __init__(self, time, event, X, w):
        order = np.argsort(time, kind="stable")
        self.time = time[order]
        self.event = event[order].astype(bool)
        self.X = np.ascontiguousarray(X[order], dtype=float)
        self.w = np.ascontiguousarray(w[order], dtype=float)
        self.wd = self.w * self.event
        # tie blocks of equal observed time share one risk set
        new_block = np.concatenate(([True], self.time[1:] != self.time[:-1]))
        self.block_start = np.flatnonzero(new_block)
        self.block_end = np.append(self.block_start[1:], self.time.size)
        ev = np.flatnonzero(self.event)
        self.event_times, inverse = np.unique(self.time[ev], return_inverse=True)
        self.d = np.bincount(inverse, weights=self.wd[ev], minlength=self.event_times.size)
        self.first_unique = np.searchsorted(self.time, self.event_times, side="left")

    def __call__(self, beta):
        return _kernels.cox_breslow(self.X, self.w, self.wd, self.block_start, self.block_end,
                                    np.ascontiguousarray(beta, dtype=float))

    def breslow(self, beta):
        r = self.w * np.exp(self.X @ beta)
        denom = np.cumsum(r[::-1])[::-1][self.first_unique]
        return self.event_times, np.cumsum(self.d / denom)


def cox_partial_loglik(data: SurvivalDataset, beta, include_exposure=True, covariate_subset=(), weights=None):
    """Breslow partial log-likelihood, score and information at ``beta`` (natural scale)."""
    X = cox_design(data, include_exposure, covariate_subset)
    w = _check_weights(weights, data.n)
    return _CoxProblem(data.time, data.event, X, w)(np.asarray(beta, dtype=float))


def fit_cox(
    data: SurvivalDataset,
    include_exposure: bool = True,
    covariate_subset: Sequence[int] = (),
    weights=None,
    *,
    init=None,
    tol: float = TOL,
    max_iter: int = MAX_ITER,
) -> FittedCox:
    """Weighted Cox model with Breslow ties and Breslow baseline hazard.

    ``init`` optionally gives starting coefficients on the natural scale,
    e.g. the full-sample estimate when refitting bootstrap resamples.
    """
    subset = tuple(int(j) for j in covariate_subset)
    X = cox_design(data, include_exposure, subset)
    w = _check_weights(weights, data.n)
    if not np.any(data.event.astype(bool) & (w > 0)):
        raise EstimationError("no events: Cox model cannot be fitted")

    k = X.shape[1]
    Z, center, scale = _standardize(X)
    problem = _CoxProblem(data.time, data.event, Z, w)
    if k == 0:
        beta_z = np.zeros(0)
        value, iterations = problem(beta_z)[0], 0
    else:
        x0 = np.zeros(k) if init is None else np.asarray(init, dtype=float) * scale
        try:
            beta_z, value, iterations = _newton(0, problem.X, _EMPTY_F, problem.w, problem.wd, problem.block_start,
                                                problem.block_end, x0, tol, max_iter, problem.d.sum(), 0, "Cox model")
        except ConvergenceError as exc:
            exc.last_params = exc.last_params / scale
            raise

    beta = beta_z / scale
    times, cumhaz_centered = problem.breslow(beta_z)
    # undo centering: exp(z'b) = exp(x'beta) * exp(-center'beta)
    cumhaz = cumhaz_centered * np.exp(-np.dot(center, beta))
    return FittedCox(beta, times, cumhaz, True, iterations, value, include_exposure, subset)


def predict_cumhaz(fit: FittedCox, covariates, exposure: int, t):
    """``H0(t) * exp(gamma * a + beta' L)`` with ``L`` the full covariate vector of a subject.

    ``covariates`` may be the full covariate row (the fitted subset is picked
    out) or already restricted to the fitted subset.
    """
    L = np.asarray(covariates, dtype=float).reshape(-1)
    subset = list(fit.covariate_subset)
    if L.size != len(subset):
        if subset and L.size > max(subset):
            L = L[subset]
        else:
            raise InputError("covariate vector does not match the fitted model")
    lp = float(np.dot(fit.beta, L))
    if fit.include_exposure:
        lp += fit.gamma * exposure
    elif exposure not in (0, 1):
        raise InputError("exposure must be 0 or 1")
    if np.any(np.asarray(t) < 0):
        raise InputError("t must be non-negative")
    return fit.cumhaz(t) * np.exp(lp)
