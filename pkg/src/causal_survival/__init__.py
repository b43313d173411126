"""Causal contrasts for right-censored survival data.

Inverse probability weighting and g-computation estimators of the average
hazard ratio and the restricted mean survival time difference, a
nonparametric bootstrap, and a Monte-Carlo engine comparing the two.
"""

from .errors import (
    CausalSurvivalError,
    ConvergenceError,
    EstimationError,
    InputError,
    PositivityError,
    SeparationError,
    SingularMatrixError,
)
from .estimators import (
    CausalEstimate,
    HazardCurve,
    PropensityWeights,
    average_hazard_ratio,
    counterfactual_survival,
    gcomp_estimate,
    hazard_from_survival,
    ipw_estimate,
    stabilized_weights,
)
from .inference import BootstrapResult, bootstrap
from .regression import FittedCox, FittedLogistic, fit_cox, fit_logistic, predict_cumhaz, predict_ps
from .simulation import (
    COVARIATE_SETS,
    MetricsTable,
    ScenarioConfig,
    Truth,
    generate_dataset,
    run_scenario,
    theoretical_truth,
)
from .survival_core import (
    RiskTable,
    StepSurvival,
    SurvivalDataset,
    build_risk_table,
    rmst,
    rmst_difference,
    select_tau,
    weighted_km,
)

__version__ = "0.1.0"

__all__ = [
    "BootstrapResult",
    "COVARIATE_SETS",
    "CausalEstimate",
    "CausalSurvivalError",
    "ConvergenceError",
    "EstimationError",
    "FittedCox",
    "FittedLogistic",
    "HazardCurve",
    "InputError",
    "MetricsTable",
    "PositivityError",
    "PropensityWeights",
    "RiskTable",
    "ScenarioConfig",
    "SeparationError",
    "SingularMatrixError",
    "StepSurvival",
    "SurvivalDataset",
    "Truth",
    "average_hazard_ratio",
    "bootstrap",
    "build_risk_table",
    "counterfactual_survival",
    "fit_cox",
    "fit_logistic",
    "gcomp_estimate",
    "generate_dataset",
    "hazard_from_survival",
    "ipw_estimate",
    "predict_cumhaz",
    "predict_ps",
    "rmst",
    "rmst_difference",
    "run_scenario",
    "select_tau",
    "stabilized_weights",
    "theoretical_truth",
    "weighted_km",
]
