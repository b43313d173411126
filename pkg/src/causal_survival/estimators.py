"""Inverse-probability-weighting and g-computation estimators.

Both estimators return the log average hazard ratio and the difference in
restricted mean survival time up to ``tau`` (exposed minus unexposed), plus
the confounder-adjusted survival curves they were computed from.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import EstimationError, InputError, PositivityError
from .regression import FittedCox, fit_cox, fit_logistic, predict_ps
from .survival_core import StepSurvival, SurvivalDataset, build_risk_table, rmst_difference, weighted_km

logger = logging.getLogger(__name__)

__all__ = [
    "PropensityWeights",
    "CausalEstimate",
    "HazardCurve",
    "stabilized_weights",
    "ipw_estimate",
    "counterfactual_survival",
    "hazard_from_survival",
    "average_hazard_ratio",
    "gcomp_estimate",
]

PS_BOUND = 1e-6
# cells per block when averaging exp(-H0 * risk) over subjects
_BLOCK_CELLS = 2_000_000


@dataclass(frozen=True)
class PropensityWeights:
    ps: np.ndarray
    weights: np.ndarray
    prevalence: float


@dataclass(frozen=True)
class CausalEstimate:
    method: str
    covariate_set: tuple[int, ...]
    log_ahr: float
    rmst_diff: float
    tau: float
    survival_curves: tuple[StepSurvival, StepSurvival]
    diagnostics: dict = field(default_factory=dict)

    @property
    def s1(self) -> StepSurvival:
        return self.survival_curves[0]

    @property
    def s0(self) -> StepSurvival:
        return self.survival_curves[1]


@dataclass(frozen=True)
class HazardCurve:
    """Piecewise-constant hazard: ``values[j]`` applies on ``(times[j-1], times[j]]``."""

    times: np.ndarray
    values: np.ndarray

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.times, t, side="left")
        if np.any(idx >= self.times.size) or np.any(t <= 0):
            raise InputError("hazard requested outside its grid")
        return self.values[idx]


def _check_tau(tau):
    if tau is None or not tau > 0:
        raise InputError("tau must be positive")


def stabilized_weights(data: SurvivalDataset, covariate_subset: Sequence[int] = ()) -> PropensityWeights:
    """Logistic propensity score on the chosen covariates and stabilized IPW weights."""
    subset = list(covariate_subset)
    a = data.exposure.astype(float)
    prevalence = float(a.mean())
    if prevalence in (0.0, 1.0):
        raise InputError("both exposure groups must be non-empty")

    if subset:
        X = np.column_stack((np.ones(data.n), data.covariates[:, subset]))
        ps = predict_ps(fit_logistic(X, a), X)
    else:
        ps = np.full(data.n, prevalence)
    if np.any(ps < PS_BOUND) or np.any(ps > 1 - PS_BOUND):
        raise PositivityError("positivity violation: propensity score numerically 0 or 1")

    weights = np.where(a == 1, prevalence / ps, (1 - prevalence) / (1 - ps))
    mean_weight = weights.mean()
    if abs(mean_weight - 1) > 0.1:
        logger.warning("mean stabilized weight is %.3f; check the propensity model", mean_weight)
    return PropensityWeights(ps, weights, prevalence)


def ipw_estimate(data: SurvivalDataset, covariate_subset: Sequence[int], tau: float, *, init=None) -> CausalEstimate:
    """Weighted Kaplan-Meier curves per arm plus a weighted exposure-only Cox model."""
    _check_tau(tau)
    pw = stabilized_weights(data, covariate_subset)
    curves = []
    for group in (1, 0):
        table = build_risk_table(data, pw.weights, group)
        if table.times.size == 0:
            raise EstimationError(f"no events in exposure group {group}")
        curves.append(weighted_km(table))
    s1, s0 = curves
    cox = fit_cox(data, True, (), pw.weights, init=init)
    return CausalEstimate(
        method="IPW",
        covariate_set=tuple(covariate_subset),
        log_ahr=cox.gamma,
        rmst_diff=rmst_difference(s1, s0, tau),
        tau=float(tau),
        survival_curves=(s1, s0),
        diagnostics={
            "mean_weight": float(pw.weights.mean()),
            "max_weight": float(pw.weights.max()),
            "cox_iterations": cox.iterations,
        },
    )


def _counterfactual_probs(cumhaz, risk):
    """Row means of ``exp(-cumhaz[j] * risk[i])`` computed in memory-bounded blocks."""
    out = np.empty(cumhaz.size)
    step = max(1, _BLOCK_CELLS // max(1, risk.size))
    for start in range(0, cumhaz.size, step):
        block = cumhaz[start:start + step]
        out[start:start + step] = np.exp(-np.multiply.outer(block, risk)).mean(axis=1)
    return out


def counterfactual_survival(qmodel: FittedCox, data: SurvivalDataset, a: int) -> StepSurvival:
    """Standardized survival under ``do(A = a)``, averaged over every subject in ``data``."""
    if not qmodel.include_exposure:
        raise InputError("Q-model must include the exposure")
    if a not in (0, 1):
        raise InputError("a must be 0 or 1")
    subset = list(qmodel.covariate_subset)
    if subset and max(subset) >= data.p:
        raise InputError("data has fewer covariates than the Q-model")
    lp = data.covariates[:, subset] @ qmodel.beta + qmodel.gamma * a
    probs = _counterfactual_probs(qmodel.baseline_cumhaz, np.exp(lp))
    # mean of non-increasing columns is non-increasing up to rounding
    probs = np.minimum.accumulate(np.clip(probs, 0.0, 1.0))
    return StepSurvival(qmodel.baseline_times, probs)


def hazard_from_survival(surv: StepSurvival) -> HazardCurve:
    """Backward log-differences of ``S`` on its own grid, starting from ``S(0) = 1``."""
    if surv.times.size == 0:
        raise InputError("survival curve has an empty grid")
    if np.any(surv.probs <= 0):
        raise EstimationError("hazard undefined at zero survival")
    log_s = np.concatenate(([0.0], np.log(surv.probs)))
    t = np.concatenate(([0.0], surv.times))
    return HazardCurve(surv.times, -np.diff(log_s) / np.diff(t))


def average_hazard_ratio(lambda1: HazardCurve, lambda0: HazardCurve, data: SurvivalDataset) -> float:
    """Log of the mean hazard ratio over observed event times; censored rows are ignored."""
    event_times = data.time[data.event == 1]
    if event_times.size == 0:
        raise EstimationError("no events")
    h1 = lambda1(event_times)
    h0 = lambda0(event_times)
    if np.any(h0 <= 0):
        raise EstimationError("unexposed hazard is zero at an event time")
    return float(np.log(np.mean(h1 / h0)))


def gcomp_estimate(data: SurvivalDataset, covariate_subset: Sequence[int], tau: float, *, init=None) -> CausalEstimate:
    """G-computation with a Cox Q-model on exposure plus ``covariate_subset``."""
    _check_tau(tau)
    qmodel = fit_cox(data, True, covariate_subset, init=init)
    s1 = counterfactual_survival(qmodel, data, 1)
    s0 = counterfactual_survival(qmodel, data, 0)
    log_ahr = average_hazard_ratio(hazard_from_survival(s1), hazard_from_survival(s0), data)
    return CausalEstimate(
        method="GC",
        covariate_set=tuple(covariate_subset),
        log_ahr=log_ahr,
        rmst_diff=rmst_difference(s1, s0, tau),
        tau=float(tau),
        survival_curves=(s1, s0),
        diagnostics={
            "qmodel_coefficients": qmodel.coefficients.tolist(),
            "cox_iterations": qmodel.iterations,
        },
    )
