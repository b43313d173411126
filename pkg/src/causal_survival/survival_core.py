"""Survival data containers, weighted risk tables, Kaplan-Meier and RMST."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import EstimationError, InputError

__all__ = [
    "SurvivalDataset",
    "RiskTable",
    "StepSurvival",
    "build_risk_table",
    "weighted_km",
    "rmst",
    "rmst_difference",
    "select_tau",
]


@dataclass(frozen=True)
class SurvivalDataset:
    """Right-censored sample of ``(time, event, exposure, covariates)`` rows.

    Arrays are copied to read-only float/int arrays on construction, so a
    dataset can be shared freely between threads and processes.
    """

    time: np.ndarray
    event: np.ndarray
    exposure: np.ndarray
    covariates: np.ndarray
    covariate_names: tuple[str, ...] = ()

    def __post_init__(self):
        time = np.array(self.time, dtype=float).reshape(-1)
        n = time.shape[0]
        event = np.array(self.event).reshape(-1)
        exposure = np.array(self.exposure).reshape(-1)
        cov = np.array(self.covariates, dtype=float)
        if cov.ndim == 1:
            cov = cov.reshape(n, -1) if cov.size else np.empty((n, 0))
        if event.shape[0] != n or exposure.shape[0] != n or cov.shape[0] != n:
            raise InputError("time, event, exposure and covariates must have the same number of rows")
        if not np.all(np.isfinite(time)) or np.any(time < 0):
            raise InputError("times must be finite and non-negative")
        for name, arr in (("event", event), ("exposure", exposure)):
            if not np.all(np.isin(arr, (0, 1))):
                raise InputError(f"{name} flags must be 0 or 1")
        if not np.all(np.isfinite(cov)):
            raise InputError("covariates must be finite")
        names = tuple(self.covariate_names) or tuple(f"L{j + 1}" for j in range(cov.shape[1]))
        if len(names) != cov.shape[1]:
            raise InputError(f"expected {cov.shape[1]} covariate names, got {len(names)}")

        event = event.astype(np.int8)
        exposure = exposure.astype(np.int8)
        for arr in (time, event, exposure, cov):
            arr.setflags(write=False)
        object.__setattr__(self, "time", time)
        object.__setattr__(self, "event", event)
        object.__setattr__(self, "exposure", exposure)
        object.__setattr__(self, "covariates", cov)
        object.__setattr__(self, "covariate_names", names)

    @classmethod
    def from_records(cls, records, covariate_names: Sequence[str] = ()) -> "SurvivalDataset":
        """Build from an iterable of ``(time, event, exposure, covariates)`` tuples."""
        records = list(records)
        if not records:
            raise InputError("dataset is empty")
        time, event, exposure, cov = zip(*records)
        return cls(np.asarray(time), np.asarray(event), np.asarray(exposure),
                   np.asarray([list(c) for c in cov], dtype=float), tuple(covariate_names))

    @property
    def n(self) -> int:
        return self.time.shape[0]

    @property
    def p(self) -> int:
        return self.covariates.shape[1]

    def take(self, indices) -> "SurvivalDataset":
        """Row subset (with repetition allowed), e.g. a bootstrap resample."""
        idx = np.asarray(indices)
        # rows of a valid dataset are valid: skip re-validation
        sub = object.__new__(SurvivalDataset)
        for name, arr in (("time", self.time[idx]), ("event", self.event[idx]),
                          ("exposure", self.exposure[idx]), ("covariates", self.covariates[idx])):
            arr.setflags(write=False)
            object.__setattr__(sub, name, arr)
        object.__setattr__(sub, "covariate_names", self.covariate_names)
        return sub

    def covariate_index(self, names: Sequence[str]) -> list[int]:
        lookup = {name: j for j, name in enumerate(self.covariate_names)}
        missing = [name for name in names if name not in lookup]
        if missing:
            raise InputError(f"unknown covariates: {', '.join(missing)}")
        return [lookup[name] for name in names]


@dataclass(frozen=True)
class RiskTable:
    """Weighted event and at-risk counts at the distinct event times of one group."""

    group: int
    times: np.ndarray
    events: np.ndarray
    at_risk: np.ndarray


@dataclass(frozen=True)
class StepSurvival:
    """Right-continuous step survival curve with ``S(t) = 1`` before ``times[0]``."""

    times: np.ndarray
    probs: np.ndarray
    _check: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float).reshape(-1)
        probs = np.asarray(self.probs, dtype=float).reshape(-1)
        if times.shape != probs.shape:
            raise InputError("times and probs must have the same length")
        if self._check:
            if np.any(np.diff(times) <= 0):
                raise InputError("survival grid must be strictly increasing")
            if np.any(probs < 0) or np.any(probs > 1):
                raise InputError("survival probabilities must lie in [0, 1]")
            if np.any(np.diff(probs) > 1e-12):
                raise InputError("survival probabilities must be non-increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "probs", probs)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.times, t, side="right") - 1
        padded = np.concatenate(([1.0], self.probs))
        out = padded[idx + 1]
        return out if out.ndim else float(out)


def build_risk_table(data: SurvivalDataset, weights, group: int) -> RiskTable:
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (data.n,):
        raise InputError(f"weights must have length {data.n}")
    if np.any(weights < 0) or not np.all(np.isfinite(weights)):
        raise InputError("weights must be finite and non-negative")
    if group not in (0, 1):
        raise InputError("group must be 0 or 1")

    mask = data.exposure == group
    if not mask.any():
        raise InputError("group has no observations")
    time = data.time[mask]
    event = data.event[mask].astype(bool)
    w = weights[mask]

    event_times, inverse = np.unique(time[event], return_inverse=True)
    events = np.bincount(inverse, weights=w[event], minlength=event_times.size)

    order = np.argsort(time, kind="stable")
    sorted_time = time[order]
    # suffix sums: total weight with T >= t
    suffix = np.concatenate((np.cumsum(w[order][::-1])[::-1], [0.0]))
    at_risk = suffix[np.searchsorted(sorted_time, event_times, side="left")]
    return RiskTable(group, event_times, events, at_risk)


def weighted_km(table: RiskTable) -> StepSurvival:
    """Product-limit curve ``prod_{t_j <= t} (1 - d_j / Y_j)`` from a risk table."""
    if np.any(table.at_risk <= 0):
        raise EstimationError("zero risk set")
    factors = np.clip(1.0 - table.events / table.at_risk, 0.0, 1.0)
    return StepSurvival(table.times, np.cumprod(factors))


def rmst(surv: StepSurvival, tau: float) -> float:
    """Exact area under the step curve on ``[0, tau]``.

    Past the last grid time the final survival value is carried flat.
    """
    if not tau > 0:
        raise InputError("tau must be positive")
    k = int(np.searchsorted(surv.times, tau, side="left"))
    edges = np.concatenate(([0.0], surv.times[:k], [tau]))
    values = np.concatenate(([1.0], surv.probs[:k]))
    return float(np.dot(values, np.diff(edges)))


def rmst_difference(s1: StepSurvival, s0: StepSurvival, tau: float) -> float:
    return rmst(s1, tau) - rmst(s0, tau)


def select_tau(data: SurvivalDataset, min_at_risk_fraction: float = 0.10) -> float:
    """Largest observed time at which every exposure group keeps enough subjects at risk.

    A subject counts as at risk at ``t`` when its observed time is ``>= t``,
    censored or not. Each group needs at least ``ceil(fraction * group size)``.
    """
    if not 0 < min_at_risk_fraction <= 1:
        raise InputError("min_at_risk_fraction must be in (0, 1]")
    tau = math.inf
    for group in (0, 1):
        times = data.time[data.exposure == group]
        if times.size == 0:
            raise InputError("both exposure groups must be non-empty")
        # guard against 0.1 * 500 = 50.00000000000001 style round-up
        k = max(1, math.ceil(min_at_risk_fraction * times.size - 1e-9))
        kth_largest = np.partition(times, times.size - k)[times.size - k]
        tau = min(tau, float(kth_largest))
    if not tau > 0:
        raise EstimationError("tau undefined")
    return tau
