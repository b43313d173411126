"""Monte-Carlo comparison of IPW and g-computation on simulated cohorts.

Data follow a Weibull proportional-hazards model (scale 40, shape 2) with six
baseline covariates: L1-L3 Bernoulli(0.5), L4-L6 standard normal. Exposure
depends on L2, L3, L5, L6; the outcome on the exposure and L1, L2, L4, L5.
Censoring is uniform on ``[0, censor_max]``.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Mapping

import numpy as np

from . import rng
from .errors import CausalSurvivalError, EstimationError, InputError
from .estimators import gcomp_estimate, ipw_estimate
from .inference import bootstrap_replicates, summarize_replicates
from .regression import fit_cox
from .survival_core import SurvivalDataset, build_risk_table, rmst_difference, select_tau, weighted_km

__all__ = [
    "COVARIATE_SETS",
    "ScenarioConfig",
    "Truth",
    "MetricsRow",
    "MetricsTable",
    "simulate_cohort",
    "generate_dataset",
    "theoretical_truth",
    "run_scenario",
    "performance_metrics",
]

WEIBULL_SCALE = 40.0
WEIBULL_SHAPE = 2.0
EXPOSURE_COEFS = {1: math.log(2.0), 2: math.log(1.5), 4: math.log(1.5), 5: math.log(2.0)}
# The exposure linear predictor minus its intercept is symmetric about
# (log 2 + log 1.5) / 2, so this intercept gives a marginal prevalence of
# exactly 50%. The rounded value -0.5 gives 51.05%.
EXPOSURE_INTERCEPT = -(math.log(2.0) + math.log(1.5)) / 2
OUTCOME_COEFS = {0: math.log(1.8), 1: math.log(1.3), 3: math.log(1.8), 4: math.log(1.3)}
COVARIATE_NAMES = ("L1", "L2", "L3", "L4", "L5", "L6")

# zero-based column indices into (L1..L6)
COVARIATE_SETS = {
    "risk_factors": (0, 1, 3, 4),
    "confounders": (1, 4),
}
METHODS = ("IPW", "GC")
ESTIMANDS = ("log_ahr", "rmst_diff")


@dataclass(frozen=True)
class ScenarioConfig:
    n: int = 500
    gamma: float = math.log(1.3)
    censor_max: float = 70.0
    covariate_sets: tuple[str, ...] = ("risk_factors", "confounders")
    replicates: int = 1000
    bootstrap_B: int = 500
    seed: int = 0
    level: float = 0.95
    tau_fraction: float = 0.10
    exposure_intercept: float = EXPOSURE_INTERCEPT

    def __post_init__(self):
        problems = self.validate()
        if problems:
            raise InputError("invalid scenario: " + "; ".join(problems))

    def validate(self) -> list[str]:
        problems = []
        if not isinstance(self.n, (int, np.integer)) or self.n < 2:
            problems.append("n must be an integer >= 2")
        if not isinstance(self.replicates, (int, np.integer)) or self.replicates < 1:
            problems.append("replicates must be an integer >= 1")
        if not isinstance(self.bootstrap_B, (int, np.integer)) or self.bootstrap_B < 0 or self.bootstrap_B == 1:
            problems.append("bootstrap_B must be 0 (point estimates only) or an integer >= 2")
        if not (isinstance(self.censor_max, (int, float)) and self.censor_max > 0):
            problems.append("censor_max must be positive")
        if not (isinstance(self.gamma, (int, float)) and math.isfinite(self.gamma)):
            problems.append("gamma must be a finite number")
        if not 0 < self.level < 1:
            problems.append("level must lie in (0, 1)")
        if not 0 < self.tau_fraction <= 1:
            problems.append("tau_fraction must lie in (0, 1]")
        unknown = [s for s in self.covariate_sets if s not in COVARIATE_SETS]
        if unknown or not self.covariate_sets:
            problems.append(f"covariate_sets must be a non-empty subset of {sorted(COVARIATE_SETS)}")
        return problems

    @classmethod
    def from_dict(cls, raw: Mapping) -> "ScenarioConfig":
        raw = dict(raw)
        known = set(cls.__dataclass_fields__) | {"covariate_set"}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise InputError(f"unknown config fields: {', '.join(unknown)}")
        if "covariate_set" in raw:
            value = raw.pop("covariate_set")
            raw["covariate_sets"] = (value,) if isinstance(value, str) else tuple(value)
        elif "covariate_sets" in raw:
            value = raw["covariate_sets"]
            raw["covariate_sets"] = (value,) if isinstance(value, str) else tuple(value)
        return cls(**raw)


@dataclass(frozen=True)
class Truth:
    gamma: float
    censor_max: float
    log_ahr: float
    rmst_diff: float
    tau: float
    n_large: int = 0
    n_reps: int = 1
    seed: int = 0


def simulate_cohort(n: int, gamma: float, censor_max: float, gen: np.random.Generator,
                    randomized: bool = False, exposure_intercept: float = EXPOSURE_INTERCEPT) -> SurvivalDataset:
    """One simulated cohort; ``randomized`` draws exposure as Bernoulli(0.5) independent of L."""
    L = np.empty((n, 6))
    L[:, :3] = gen.binomial(1, 0.5, size=(n, 3))
    L[:, 3:] = gen.standard_normal((n, 3))
    if randomized:
        A = gen.binomial(1, 0.5, size=n)
    else:
        logit = exposure_intercept + sum(c * L[:, j] for j, c in EXPOSURE_COEFS.items())
        A = (gen.random(n) < 1.0 / (1.0 + np.exp(-logit))).astype(int)
    lp = gamma * A + sum(c * L[:, j] for j, c in OUTCOME_COEFS.items())
    u = gen.random(n)
    # inverse of S(t | A, L) = exp(-(t / scale)^shape * exp(lp))
    latent = WEIBULL_SCALE * (-np.log1p(-u) * np.exp(-lp)) ** (1.0 / WEIBULL_SHAPE)
    censor = gen.uniform(0.0, censor_max, size=n)
    time = np.minimum(latent, censor)
    event = (latent <= censor).astype(int)
    return SurvivalDataset(time, event, A, L, COVARIATE_NAMES)


def generate_dataset(config: ScenarioConfig, replicate_index: int) -> SurvivalDataset:
    return simulate_cohort(config.n, config.gamma, config.censor_max,
                           rng.stream(config.seed, rng.DATA, replicate_index),
                           exposure_intercept=config.exposure_intercept)


def _marginal_truth(randomized: SurvivalDataset, tau: float):
    log_hr = fit_cox(randomized, True, ()).gamma
    ones = np.ones(randomized.n)
    s1 = weighted_km(build_risk_table(randomized, ones, 1))
    s0 = weighted_km(build_risk_table(randomized, ones, 0))
    return log_hr, rmst_difference(s1, s0, tau), tau


def theoretical_truth(gamma: float, censor_max: float, n_large: int = 1_000_000, seed: int = 0,
                      n_reps: int = 1, tau_fraction: float = 0.10,
                      exposure_intercept: float = EXPOSURE_INTERCEPT) -> Truth:
    """Marginal log hazard ratio and RMST difference from large randomized cohorts.

    Exposure is drawn independently of the covariates, so an exposure-only Cox
    model and unadjusted Kaplan-Meier curves target the marginal contrast.
    The horizon is the large-sample limit of the per-dataset rule: ``select_tau``
    applied to an equally large cohort with confounded exposure, drawn as in
    ``generate_dataset``. Values are averaged over ``n_reps`` cohort pairs.
    """
    if n_large < 2 or n_reps < 1:
        raise InputError("n_large must be >= 2 and n_reps >= 1")
    results = []
    for r in range(n_reps):
        observational = simulate_cohort(n_large, gamma, censor_max, rng.stream(seed, rng.TRUTH, r, 1),
                                        exposure_intercept=exposure_intercept)
        tau = select_tau(observational, tau_fraction)
        del observational
        randomized = simulate_cohort(n_large, gamma, censor_max, rng.stream(seed, rng.TRUTH, r), randomized=True)
        results.append(_marginal_truth(randomized, tau))
    log_ahr, rmst_diff, tau = np.mean(results, axis=0)
    return Truth(float(gamma), float(censor_max), float(log_ahr), float(rmst_diff), float(tau),
                 int(n_large), int(n_reps), int(seed))


# ----------------------------------------------------------------------------
# scenario execution

DEFAULT_ESTIMATORS: dict[str, Callable] = {"IPW": ipw_estimate, "GC": gcomp_estimate}


def _cells(config):
    return [(method, cset) for cset in config.covariate_sets for method in METHODS]


def _replicate(config: ScenarioConfig, r: int, estimators: Mapping[str, Callable]) -> dict:
    """Point estimates and bootstrap summaries for every (method, covariate set) cell."""
    cells = _cells(config)
    out = {"replicate": r, "cells": {}}
    try:
        data = generate_dataset(config, r)
        tau = select_tau(data, config.tau_fraction)
    except CausalSurvivalError as exc:
        for cell in cells:
            out["cells"][cell] = {"failed": True, "error": str(exc)}
        return out
    out["tau"] = tau

    inits = {}
    points = {}
    live = []
    for method, cset in cells:
        subset = COVARIATE_SETS[cset]
        try:
            est = estimators[method](data, subset, tau)
        except (CausalSurvivalError, np.linalg.LinAlgError) as exc:
            out["cells"][(method, cset)] = {"failed": True, "error": str(exc)}
            continue
        live.append((method, cset))
        points[(method, cset)] = est
        diagnostics = getattr(est, "diagnostics", {}) or {}
        inits[(method, cset)] = diagnostics.get("qmodel_coefficients") if method == "GC" else [est.log_ahr]

    def bundle(d: SurvivalDataset):
        values = []
        for method, cset in live:
            try:
                est = estimators[method](d, COVARIATE_SETS[cset], tau, init=inits[(method, cset)])
                values += [est.log_ahr, est.rmst_diff]
            except (CausalSurvivalError, np.linalg.LinAlgError):
                values += [np.nan, np.nan]
        return np.array(values)

    if not live:
        return out
    if config.bootstrap_B == 0:
        for cell in live:
            est = points[cell]
            out["cells"][cell] = {"failed": False,
                                  **{e: (getattr(est, e), math.nan, math.nan, math.nan, 0) for e in ESTIMANDS}}
        return out
    point, reps = bootstrap_replicates(data, bundle, config.bootstrap_B, _bootstrap_seed(config, r))
    for k, cell in enumerate(live):
        entry = {"failed": False}
        try:
            for e, estimand in enumerate(ESTIMANDS):
                col = 2 * k + e
                if not np.isfinite(point[col]):
                    raise EstimationError("full-sample estimate failed")
                res = summarize_replicates(point[col], reps[:, col], config.level)
                entry[estimand] = (res.point, res.sd, res.ci_lower, res.ci_upper, res.n_failed)
        except CausalSurvivalError as exc:
            entry = {"failed": True, "error": str(exc)}
        out["cells"][cell] = entry
    return out


def _bootstrap_seed(config: ScenarioConfig, r: int) -> int:
    # a distinct 63-bit seed per replicate, derived from (seed, r)
    return int(rng.stream(config.seed, rng.BOOTSTRAP, r).integers(0, 2**63 - 1))


def _replicate_task(args):
    config, r = args
    return _replicate(config, r, DEFAULT_ESTIMATORS)


@dataclass(frozen=True)
class MetricsRow:
    method: str
    covariate_set: str
    estimand: str
    theta: float
    n_replicates: int
    n_used: int
    convergence_failure_pct: float
    convergence_failure_se: float
    mab: float
    mab_se: float
    mse: float
    mse_se: float
    empirical_sd: float
    mean_estimated_sd: float
    veb_pct: float
    veb_se: float
    coverage_pct: float
    coverage_se: float
    rejection_pct: float
    rejection_se: float
    rejection_kind: str


@dataclass
class MetricsTable:
    config: ScenarioConfig
    truth: Truth
    rows: list[MetricsRow]
    replicate_records: list[dict] = field(default_factory=list, repr=False)

    def cell(self, method: str, covariate_set: str, estimand: str) -> MetricsRow:
        for row in self.rows:
            if (row.method, row.covariate_set, row.estimand) == (method, covariate_set, estimand):
                return row
        raise KeyError((method, covariate_set, estimand))

    def to_csv(self) -> str:
        buf = io.StringIO()
        names = list(MetricsRow.__dataclass_fields__)
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(names)
        for row in self.rows:
            writer.writerow([_fmt(getattr(row, k)) for k in names])
        return buf.getvalue()

    def replicates_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["replicate", "tau", "method", "covariate_set", "estimand", "estimate", "sd",
                         "ci_lower", "ci_upper", "bootstrap_failures", "failed"])
        for rec in self.replicate_records:
            for (method, cset), entry in rec["cells"].items():
                for estimand in ESTIMANDS:
                    if entry["failed"]:
                        writer.writerow([rec["replicate"], _fmt(rec.get("tau", math.nan)), method, cset, estimand,
                                         "", "", "", "", "", 1])
                    else:
                        est, sd, lo, hi, nf = entry[estimand]
                        writer.writerow([rec["replicate"], _fmt(rec["tau"]), method, cset, estimand,
                                         _fmt(est), _fmt(sd), _fmt(lo), _fmt(hi), nf, 0])
        return buf.getvalue()

    def summary_text(self) -> str:
        c, t = self.config, self.truth
        kind = self.rows[0].rejection_kind if self.rows else "rejection"
        lines = [
            f"Scenario: n={c.n}, gamma={c.gamma:.4f}, censor_max={c.censor_max:g}, "
            f"replicates={c.replicates}, bootstrap B={c.bootstrap_B}, seed={c.seed}",
            f"Theoretical values: log AHR = {t.log_ahr:.3f}; RMST difference = {t.rmst_diff:.3f} at tau = {t.tau:.1f}",
        ]
        for estimand, title in (("log_ahr", "log average hazard ratio"), ("rmst_diff", "RMST difference")):
            lines.append("")
            lines.append(f"== {title} ==")
            header = f"{'method':<6} {'covariates':<13} {'fail%':>6} {'MAB':>8} {'MSE':>8} {'VEB%':>7} {'cover%':>7} {kind + '%':>8}"
            lines.append(header)
            for row in self.rows:
                if row.estimand != estimand:
                    continue
                lines.append(
                    f"{row.method:<6} {row.covariate_set:<13} {row.convergence_failure_pct:6.1f} {row.mab:8.3f} "
                    f"{row.mse:8.3f} {row.veb_pct:7.1f} {row.coverage_pct:7.1f} {row.rejection_pct:8.1f}"
                )
                lines.append(
                    f"{'':<6} {'(MC SE)':<13} {row.convergence_failure_se:6.1f} {row.mab_se:8.3f} "
                    f"{row.mse_se:8.3f} {row.veb_se:7.1f} {row.coverage_se:7.1f} {row.rejection_se:8.1f}"
                )
        return "\n".join(lines) + "\n"


def _fmt(value):
    if isinstance(value, float):
        return repr(value)
    return value


def _binomial(hits, m):
    p = hits.mean() if m else math.nan
    return 100.0 * p, 100.0 * math.sqrt(p * (1 - p) / m) if m else math.nan


def _veb_with_jackknife(estimates, sds):
    m = estimates.size
    if m < 3:
        return math.nan, math.nan
    emp = np.std(estimates, ddof=1)
    veb = 100.0 * (sds.mean() / emp - 1.0) if emp > 0 else math.nan
    # leave-one-out VEB from running sums
    s1, s2 = estimates.sum(), np.dot(estimates, estimates)
    loo_s1 = s1 - estimates
    loo_var = (s2 - estimates**2 - loo_s1**2 / (m - 1)) / (m - 2)
    loo_mean_sd = (sds.sum() - sds) / (m - 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        loo = 100.0 * (loo_mean_sd / np.sqrt(np.maximum(loo_var, 0.0)) - 1.0)
    if not np.all(np.isfinite(loo)):
        return veb, math.nan
    se = math.sqrt((m - 1) / m * np.sum((loo - loo.mean()) ** 2))
    return veb, se


def performance_metrics(estimates, sds, ci_lower, ci_upper, theta: float, n_replicates: int,
                        null_value: float = 0.0) -> dict:
    """Performance criteria for one cell from the replicates that produced an estimate."""
    est = np.asarray(estimates, dtype=float)
    sds = np.asarray(sds, dtype=float)
    lo = np.asarray(ci_lower, dtype=float)
    hi = np.asarray(ci_upper, dtype=float)
    m = est.size
    failed = n_replicates - m
    p_fail = failed / n_replicates
    err = est - theta
    sq = err**2
    out = {
        "n_replicates": n_replicates,
        "n_used": m,
        "convergence_failure_pct": 100.0 * p_fail,
        "convergence_failure_se": 100.0 * math.sqrt(p_fail * (1 - p_fail) / n_replicates),
        "mab": float(err.mean()) if m else math.nan,
        "mab_se": float(np.std(est, ddof=1) / math.sqrt(m)) if m > 1 else math.nan,
        "mse": float(sq.mean()) if m else math.nan,
        "mse_se": float(np.std(sq, ddof=1) / math.sqrt(m)) if m > 1 else math.nan,
        "empirical_sd": float(np.std(est, ddof=1)) if m > 1 else math.nan,
        "mean_estimated_sd": float(sds.mean()) if m else math.nan,
    }
    out["veb_pct"], out["veb_se"] = _veb_with_jackknife(est, sds)
    out["coverage_pct"], out["coverage_se"] = _binomial((lo <= theta) & (theta <= hi), m)
    out["rejection_pct"], out["rejection_se"] = _binomial((null_value < lo) | (null_value > hi), m)
    return out


def run_scenario(
    config: ScenarioConfig,
    truth: Truth,
    *,
    workers: int = 1,
    estimators: Mapping[str, Callable] | None = None,
    progress: Callable[[int], None] | None = None,
) -> MetricsTable:
    """Simulate ``config.replicates`` datasets, estimate, bootstrap, and score both methods.

    Replicate ``r`` uses random streams derived from ``(config.seed, r)`` only,
    so the table is identical for any ``workers``. Custom ``estimators`` (same
    call signature as ``ipw_estimate``) run in-process.
    """
    if not (math.isclose(truth.gamma, config.gamma, abs_tol=1e-12)
            and math.isclose(truth.censor_max, config.censor_max, abs_tol=1e-12)):
        raise InputError("truth was computed for a different (gamma, censor_max)")

    indices = range(config.replicates)
    if estimators is not None:
        records = []
        for r in indices:
            records.append(_replicate(config, r, estimators))
            if progress:
                progress(r)
    elif workers <= 1:
        records = []
        for r in indices:
            records.append(_replicate(config, r, DEFAULT_ESTIMATORS))
            if progress:
                progress(r)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_replicate_task, ((config, r) for r in indices), chunksize=4))

    kind = "type1_error" if math.isclose(config.gamma, 0.0, abs_tol=1e-12) else "power"
    rows = []
    for method, cset in _cells(config):
        for estimand in ESTIMANDS:
            theta = getattr(truth, estimand)
            ok = [rec["cells"][(method, cset)][estimand] for rec in records
                  if not rec["cells"][(method, cset)]["failed"]]
            arr = np.array(ok, dtype=float).reshape(-1, 5)
            metrics = performance_metrics(arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3], theta, config.replicates)
            if config.bootstrap_B == 0:
                for key in ("mean_estimated_sd", "veb_pct", "veb_se", "coverage_pct", "coverage_se",
                            "rejection_pct", "rejection_se"):
                    metrics[key] = math.nan
            rows.append(MetricsRow(method=method, covariate_set=cset, estimand=estimand, theta=theta,
                                   rejection_kind=kind, **metrics))
    return MetricsTable(config, truth, rows, records)


def config_to_dict(config: ScenarioConfig) -> dict:
    out = asdict(config)
    out["covariate_sets"] = list(config.covariate_sets)
    return out
