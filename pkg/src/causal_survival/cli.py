"""Command-line interface: ``analyze``, ``simulate`` and ``truth``.

Exit codes: 0 success, 1 bad input, 2 numerical or estimation failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import CausalSurvivalError, EstimationError, InputError
from .estimators import gcomp_estimate, ipw_estimate
from .inference import bootstrap_replicates, summarize_replicates
from .simulation import ScenarioConfig, Truth, config_to_dict, run_scenario, theoretical_truth
from .survival_core import StepSurvival, SurvivalDataset, select_tau

logger = logging.getLogger("causal_survival")

EXIT_OK, EXIT_INPUT, EXIT_ESTIMATION = 0, 1, 2
ESTIMATORS = {"ipw": ipw_estimate, "gc": gcomp_estimate}


@dataclass
class AnalyzeRequest:
    data: Path
    time: str
    event: str
    exposure: str
    ps_covariates: list[str] = field(default_factory=list)
    q_covariates: list[str] = field(default_factory=list)
    tau: float | None = None
    methods: list[str] = field(default_factory=lambda: ["ipw", "gc"])
    B: int = 1000
    seed: int = 0
    level: float = 0.95
    out: Path = Path("results")
    complete_case: bool = False
    threads: int = 1


def _fmt(x) -> str:
    return repr(float(x))


def read_dataset(path, time_col: str, event_col: str, exposure_col: str, covariates: Sequence[str],
                 complete_case: bool = False) -> SurvivalDataset:
    """Load a headered CSV; every problem is reported with its row and column."""
    path = Path(path)
    try:
        handle = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    with handle:
        reader = csv.DictReader(handle)
        header = reader.fieldnames or []
        used = [time_col, event_col, exposure_col, *covariates]
        missing = [c for c in dict.fromkeys(used) if c not in header]
        if missing:
            raise InputError(f"{path}: missing column(s): {', '.join(missing)}")
        rows, dropped = [], 0
        for lineno, rec in enumerate(reader, start=2):
            empty = [c for c in used if rec.get(c) is None or rec[c].strip() == ""]
            if empty:
                if complete_case:
                    dropped += 1
                    continue
                raise InputError(f"{path}: row {lineno}, column '{empty[0]}': empty value "
                                 "(use --complete-case to drop incomplete rows)")
            values = []
            for c in used:
                try:
                    values.append(float(rec[c]))
                except ValueError:
                    raise InputError(f"{path}: row {lineno}, column '{c}': cannot parse {rec[c]!r} as a number") from None
            for c, v in zip((event_col, exposure_col), values[1:3]):
                if v not in (0.0, 1.0):
                    raise InputError(f"{path}: row {lineno}, column '{c}': expected 0 or 1, got {rec[c]!r}")
            if not (math.isfinite(values[0]) and values[0] >= 0):
                raise InputError(f"{path}: row {lineno}, column '{time_col}': time must be non-negative")
            rows.append(values)
    if dropped:
        logger.warning("complete-case analysis: dropped %d incomplete row(s)", dropped)
    if not rows:
        raise InputError(f"{path}: no usable rows")
    arr = np.array(rows, dtype=float)
    return SurvivalDataset(arr[:, 0], arr[:, 1].astype(int), arr[:, 2].astype(int), arr[:, 3:], tuple(covariates))


def _curve_rows(s1: StepSurvival, s0: StepSurvival):
    grid = np.union1d(s1.times, s0.times)
    return zip(grid, s1(grid), s0(grid))


def cmd_analyze(req: AnalyzeRequest) -> int:
    covariates = list(dict.fromkeys([*req.ps_covariates, *req.q_covariates]))
    data = read_dataset(req.data, req.time, req.event, req.exposure, covariates, req.complete_case)
    methods = [m.lower() for m in req.methods]
    unknown = [m for m in methods if m not in ESTIMATORS]
    if unknown or not methods:
        raise InputError(f"--method must list ipw and/or gc, got {','.join(req.methods)}")
    tau = req.tau if req.tau is not None else select_tau(data)
    if not tau > 0:
        raise InputError("--tau must be positive")

    req.out.mkdir(parents=True, exist_ok=True)
    result_rows = []
    for method in methods:
        names = req.ps_covariates if method == "ipw" else req.q_covariates
        subset = data.covariate_index(names)
        fn = ESTIMATORS[method]
        full = fn(data, subset, tau)

        def estimator(d, fn=fn, subset=subset):
            est = fn(d, subset, tau)
            return [est.log_ahr, est.rmst_diff]

        point, reps = bootstrap_replicates(data, estimator, req.B, req.seed, workers=req.threads)
        for k, estimand in enumerate(("log_ahr", "rmst_diff")):
            res = summarize_replicates(point[k], reps[:, k], req.level)
            result_rows.append([full.method, estimand, _fmt(res.point), _fmt(res.sd), _fmt(res.ci_lower),
                                _fmt(res.ci_upper), _fmt(tau), req.B, req.seed, _fmt(req.level), res.n_failed,
                                ";".join(names)])
        with open(req.out / f"curves_{method}.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["time", "s1", "s0"])
            for t, a, b in _curve_rows(*full.survival_curves):
                writer.writerow([_fmt(t), _fmt(a), _fmt(b)])

    with open(req.out / "results.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["method", "estimand", "point", "sd", "ci_lower", "ci_upper", "tau", "B", "seed", "level",
                         "bootstrap_failures", "covariates"])
        writer.writerows(result_rows)
    return EXIT_OK


def load_config(path) -> tuple[ScenarioConfig, dict]:
    """Parse a scenario JSON file; returns the config and the optional truth block."""
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None
    if not isinstance(raw, dict):
        raise InputError(f"{path}: top level must be a JSON object")
    truth_keys = ("truth", "truth_n_large", "truth_seed", "truth_reps")
    extra = {k: raw.pop(k) for k in truth_keys if k in raw}
    try:
        config = ScenarioConfig.from_dict(raw)
    except TypeError as exc:
        raise InputError(f"{path}: {exc}") from None
    return config, extra


def _resolve_truth(config: ScenarioConfig, extra: dict) -> Truth:
    cached = extra.get("truth")
    if cached is not None:
        try:
            return Truth(config.gamma, config.censor_max, float(cached["log_ahr"]), float(cached["rmst_diff"]),
                         float(cached["tau"]))
        except (KeyError, TypeError, ValueError):
            raise InputError("truth must provide numeric log_ahr, rmst_diff and tau") from None
    return theoretical_truth(config.gamma, config.censor_max, int(extra.get("truth_n_large", 1_000_000)),
                             int(extra.get("truth_seed", config.seed)), int(extra.get("truth_reps", 1)),
                             config.tau_fraction, config.exposure_intercept)


def cmd_simulate(config_path, out: Path, threads: int = 1) -> int:
    config, extra = load_config(config_path)
    truth = _resolve_truth(config, extra)
    table = run_scenario(config, truth, workers=threads)
    out.mkdir(parents=True, exist_ok=True)
    (out / "metrics.csv").write_text(table.to_csv(), encoding="utf-8")
    (out / "replicates.csv").write_text(table.replicates_csv(), encoding="utf-8")
    (out / "summary.txt").write_text(table.summary_text(), encoding="utf-8")
    (out / "truth.json").write_text(json.dumps(_truth_dict(truth), indent=2) + "\n", encoding="utf-8")
    (out / "config.json").write_text(json.dumps(config_to_dict(config), indent=2) + "\n", encoding="utf-8")
    sys.stdout.write(table.summary_text())
    return EXIT_OK


def _truth_dict(truth: Truth) -> dict:
    return {
        "log_ahr": truth.log_ahr,
        "rmst_diff": truth.rmst_diff,
        "tau": truth.tau,
        "gamma": truth.gamma,
        "censor_max": truth.censor_max,
        "n_large": truth.n_large,
        "n_reps": truth.n_reps,
        "seed": truth.seed,
    }


def cmd_truth(gamma: float, censor_max: float, n_large: int, seed: int, reps: int = 1, out=None) -> int:
    problems = []
    if not math.isfinite(gamma):
        problems.append("--gamma must be finite")
    if not censor_max > 0:
        problems.append("--censor-max must be positive")
    if n_large < 2:
        problems.append("--n must be at least 2")
    if reps < 1:
        problems.append("--reps must be at least 1")
    if problems:
        raise InputError("; ".join(problems))
    text = json.dumps(_truth_dict(theoretical_truth(gamma, censor_max, n_large, seed, reps)), indent=2) + "\n"
    if out is not None:
        Path(out).write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return EXIT_OK


def _names(value: str) -> list[str]:
    return [v.strip() for v in value.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="causal-survival",
                                     description="IPW and g-computation estimates of causal survival contrasts.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="estimate log AHR and RMST difference on a CSV dataset")
    p.add_argument("--data", required=True, type=Path)
    p.add_argument("--time", required=True)
    p.add_argument("--event", required=True)
    p.add_argument("--exposure", required=True)
    p.add_argument("--ps-covs", default="", type=_names, help="comma-separated propensity-score covariates")
    p.add_argument("--q-covs", default="", type=_names, help="comma-separated outcome-model covariates")
    p.add_argument("--tau", type=float, default=None)
    p.add_argument("--B", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--method", default="ipw,gc", type=_names)
    p.add_argument("--complete-case", action="store_true")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", required=True, type=Path)

    p = sub.add_parser("simulate", help="run one Monte-Carlo scenario from a JSON config")
    p.add_argument("--config", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--threads", type=int, default=1)

    p = sub.add_parser("truth", help="theoretical log AHR and RMST difference for a scenario")
    p.add_argument("--gamma", required=True, type=float, help="log hazard ratio of the exposure")
    p.add_argument("--censor-max", required=True, type=float)
    p.add_argument("--n", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--reps", type=int, default=1)
    p.add_argument("--out", type=Path, default=None)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        if args.command == "analyze":
            if args.B < 2 or not 0 < args.level < 1 or args.threads < 1:
                raise InputError("--B must be >= 2, --level in (0, 1), --threads >= 1")
            req = AnalyzeRequest(args.data, args.time, args.event, args.exposure, args.ps_covs, args.q_covs,
                                 args.tau, args.method, args.B, args.seed, args.level, args.out,
                                 args.complete_case, args.threads)
            return cmd_analyze(req)
        if args.command == "simulate":
            if args.threads < 1:
                raise InputError("--threads must be >= 1")
            return cmd_simulate(args.config, args.out, args.threads)
        return cmd_truth(args.gamma, args.censor_max, args.n, args.seed, args.reps, args.out)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (EstimationError, CausalSurvivalError) as exc:
        print(f"estimation failed: {exc}", file=sys.stderr)
        return EXIT_ESTIMATION


if __name__ == "__main__":
    sys.exit(main())
