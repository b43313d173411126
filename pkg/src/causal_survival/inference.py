"""Nonparametric bootstrap of a whole estimation procedure."""

from __future__ import annotations

import math
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import rng
from .errors import CausalSurvivalError, EstimationError, InputError
from .survival_core import SurvivalDataset

__all__ = ["BootstrapResult", "bootstrap", "bootstrap_replicates", "summarize_replicates", "resample_indices"]

MAX_FAILURE_FRACTION = 0.20


@dataclass(frozen=True)
class BootstrapResult:
    point: float
    replicates: np.ndarray
    sd: float
    ci_lower: float
    ci_upper: float
    level: float = 0.95
    method: str = "percentile"
    n_failed: int = 0

    def excludes(self, value: float) -> bool:
        return not (self.ci_lower <= value <= self.ci_upper)


def resample_indices(n: int, seed: int, b: int) -> np.ndarray:
    """Row indices of bootstrap replicate ``b``; depends only on ``(seed, b)``."""
    return rng.stream(seed, rng.BOOTSTRAP, b).integers(0, n, size=n)


def _evaluate(estimator, data, seed, b, k):
    try:
        value = np.asarray(estimator(data.take(resample_indices(data.n, seed, b))), dtype=float)
    except (CausalSurvivalError, np.linalg.LinAlgError, FloatingPointError):
        return np.full(k, np.nan)
    return value.reshape(k)


def bootstrap_replicates(
    data: SurvivalDataset,
    estimator: Callable[[SurvivalDataset], object],
    B: int,
    seed: int,
    *,
    workers: int = 1,
) -> tuple[np.ndarray, np.ndarray]:
    """Full-sample estimate and a ``B x k`` array of replicate estimates.

    ``estimator`` may return a scalar or a length-``k`` vector. A replicate
    whose estimator raises is recorded as a row of NaN; a NaN entry in a
    returned vector marks a failure of that component only.
    """
    if B < 2:
        raise InputError("B must be at least 2")
    point = np.atleast_1d(np.asarray(estimator(data), dtype=float))
    k = point.size
    if workers <= 1:
        rows = [_evaluate(estimator, data, seed, b, k) for b in range(B)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(lambda b: _evaluate(estimator, data, seed, b, k), range(B)))
    return point, np.vstack(rows)


def summarize_replicates(
    point: float,
    replicates,
    level: float = 0.95,
    method: str = "percentile",
) -> BootstrapResult:
    """Standard deviation and confidence interval from replicate estimates (NaN = failed)."""
    if not 0 < level < 1:
        raise InputError("level must lie in (0, 1)")
    if method not in ("percentile", "normal"):
        raise InputError("method must be 'percentile' or 'normal'")
    reps = np.asarray(replicates, dtype=float).reshape(-1)
    ok = np.isfinite(reps)
    n_failed = int(reps.size - ok.sum())
    if n_failed > MAX_FAILURE_FRACTION * reps.size:
        raise EstimationError(f"bootstrap unstable: {n_failed} of {reps.size} replicates failed")
    reps = reps[ok]
    m = reps.size
    if m < 2:
        raise EstimationError("bootstrap unstable: fewer than two successful replicates")
    # shifting by a sample value keeps a constant sample at exactly zero spread
    sd = float(np.std(reps - reps[0], ddof=1))
    alpha = 1.0 - level
    if method == "percentile":
        ordered = np.sort(reps)
        lo = max(1, math.ceil(m * alpha / 2 - 1e-9))
        hi = min(m, math.ceil(m * (1 - alpha / 2) - 1e-9))
        ci = (float(ordered[lo - 1]), float(ordered[hi - 1]))
    else:
        z = statistics.NormalDist().inv_cdf(1 - alpha / 2)
        ci = (point - z * sd, point + z * sd)
    return BootstrapResult(float(point), reps, sd, ci[0], ci[1], level, method, n_failed)


def bootstrap(
    data: SurvivalDataset,
    estimator: Callable[[SurvivalDataset], float],
    B: int = 1000,
    seed: int = 0,
    level: float = 0.95,
    method: str = "percentile",
    *,
    workers: int = 1,
) -> BootstrapResult:
    """Resample rows with replacement ``B`` times and re-run ``estimator`` on each resample.

    The estimator must carry out the entire procedure (propensity or outcome
    model fitting included) so that the replicates reflect all sources of
    variability. Results depend only on ``seed``, not on ``workers``.
    """
    point, reps = bootstrap_replicates(data, estimator, B, seed, workers=workers)
    if point.size != 1:
        raise InputError("estimator must return a scalar; use bootstrap_replicates for vectors")
    return summarize_replicates(float(point[0]), reps[:, 0], level, method)
