import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from causal_survival import EstimationError, InputError, PositivityError, SeparationError
from causal_survival.estimators import (
    HazardCurve,
    average_hazard_ratio,
    counterfactual_survival,
    gcomp_estimate,
    hazard_from_survival,
    ipw_estimate,
    stabilized_weights,
)
from causal_survival.regression import fit_cox
from causal_survival.simulation import COVARIATE_SETS, simulate_cohort
from causal_survival.survival_core import (
    StepSurvival,
    SurvivalDataset,
    build_risk_table,
    rmst_difference,
    select_tau,
    weighted_km,
)

from conftest import random_dataset
from oracles import product_limit


def exp_curve(rate, times):
    times = np.asarray(times, dtype=float)
    return StepSurvival(times, np.exp(-rate * times))


# ---------------------------------------------------------------- weights


def test_empty_subset_gives_unit_weights(rng):
    data = random_dataset(rng, 50)
    pw = stabilized_weights(data, ())
    np.testing.assert_array_equal(pw.ps, data.exposure.mean())
    np.testing.assert_allclose(pw.weights, 1.0, rtol=1e-15)


def test_weight_formula_against_fitted_scores(rng):
    data = random_dataset(rng, 300)
    pw = stabilized_weights(data, (0, 1))
    a = data.exposure == 1
    prev = a.mean()
    np.testing.assert_allclose(pw.weights[a], prev / pw.ps[a])
    np.testing.assert_allclose(pw.weights[~a], (1 - prev) / (1 - pw.ps[~a]))


def test_weight_formula_fixed_points():
    # two covariate patterns so the fitted scores are the pattern frequencies
    L = np.array([0, 0, 0, 0, 1, 1, 1, 1], dtype=float)[:, None]
    A = [1, 0, 0, 0, 1, 1, 1, 0]
    data = SurvivalDataset(np.arange(1, 9), [1] * 8, A, L)
    pw = stabilized_weights(data, (0,))
    np.testing.assert_allclose(pw.ps, [0.25] * 4 + [0.75] * 4, atol=1e-8)
    assert pw.prevalence == 0.5
    assert pw.weights[0] == pytest.approx(2.0, abs=1e-7)
    # an exposed subject whose score equals the prevalence has unit weight
    balanced = SurvivalDataset(np.arange(1, 9), [1] * 8, [1, 0] * 4, L)
    np.testing.assert_allclose(stabilized_weights(balanced, (0,)).weights, 1.0, atol=1e-8)


def test_positivity_violation():
    # every subject with L2 = 1 is exposed: the score is pushed to 1 for them
    L = np.array([[0, 0], [0, 0], [1, 0], [1, 0], [0, 1], [0, 1], [0, 1], [1, 0], [0, 0]], dtype=float)
    data = SurvivalDataset(np.arange(1, 10), [1] * 9, [0, 1, 0, 1, 1, 1, 1, 0, 0], L)
    with pytest.raises(EstimationError) as info:
        stabilized_weights(data, (0, 1))
    assert isinstance(info.value, (PositivityError, SeparationError))


# ---------------------------------------------------------------- hazards and AHR


def test_hazard_of_exponential_is_constant():
    rng = np.random.default_rng(2)
    times = np.sort(rng.uniform(0.1, 20, 50))
    for rate in (0.03, 0.5, 2.0):
        h = hazard_from_survival(exp_curve(rate, times))
        np.testing.assert_allclose(h.values, rate, atol=1e-10, rtol=0)


def test_hazard_is_zero_where_survival_is_flat():
    h = hazard_from_survival(StepSurvival([1.0, 2.0, 3.0], [0.8, 0.8, 0.5]))
    assert h.values[1] == 0.0


def test_hazard_of_gaussian_tail_on_two_points():
    h = hazard_from_survival(StepSurvival([1.0, 2.0], np.exp(-np.array([1.0, 4.0]))))
    np.testing.assert_allclose(h.values, [1.0, 3.0], atol=1e-14)


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 30))
def test_hazard_telescopes_back_to_survival(seed, size):
    rng = np.random.default_rng(seed)
    times = np.cumsum(rng.uniform(0.01, 2.0, size))
    probs = np.cumprod(rng.uniform(0.5, 1.0, size))
    h = hazard_from_survival(StepSurvival(times, probs))
    widths = np.diff(np.concatenate(([0.0], times)))
    rebuilt = np.exp(-np.cumsum(h.values * widths))
    assert np.max(np.abs(rebuilt - probs)) < 1e-10


def test_hazard_errors_at_zero_survival():
    with pytest.raises(EstimationError, match="hazard undefined at zero survival"):
        hazard_from_survival(StepSurvival([1.0, 2.0], [0.5, 0.0]))


def test_hazard_curve_lookup_uses_left_open_intervals():
    h = HazardCurve(np.array([1.0, 2.0, 4.0]), np.array([0.1, 0.2, 0.3]))
    np.testing.assert_array_equal(h(np.array([0.5, 1.0, 1.5, 2.0, 3.9, 4.0])), [0.1, 0.1, 0.2, 0.2, 0.3, 0.3])
    with pytest.raises(InputError):
        h(4.5)


def _event_data(times):
    n = len(times)
    return SurvivalDataset(times, [1] * n, [0, 1] * (n // 2) + [0] * (n % 2), np.zeros((n, 0)))


def test_ahr_examples():
    grid = np.array([1.0, 2.0, 3.0])
    data = _event_data(grid)
    lam0 = HazardCurve(grid, np.array([0.2, 0.5, 0.1]))
    assert average_hazard_ratio(lam0, lam0, data) == 0.0
    assert average_hazard_ratio(HazardCurve(grid, 2 * lam0.values), lam0, data) == pytest.approx(math.log(2), abs=1e-15)
    ratios = HazardCurve(grid, lam0.values * np.array([1.0, 2.0, 4.0]))
    assert average_hazard_ratio(ratios, lam0, data) == pytest.approx(math.log(7 / 3), abs=1e-15)


def test_ahr_averages_over_subjects_not_distinct_times():
    grid = np.array([1.0, 2.0])
    data = _event_data([1.0, 1.0, 1.0, 2.0])
    lam0 = HazardCurve(grid, np.array([1.0, 1.0]))
    lam1 = HazardCurve(grid, np.array([1.0, 5.0]))
    assert average_hazard_ratio(lam1, lam0, data) == pytest.approx(math.log((3 + 5) / 4))


# ---------------------------------------------------------------- counterfactual survival


def test_zero_exposure_effect_gives_identical_curves(rng):
    data = random_dataset(rng, 100)
    fit = fit_cox(data, True, (0, 1))
    null = replace(fit, coefficients=np.concatenate(([0.0], fit.beta)))
    s1 = counterfactual_survival(null, data, 1)
    s0 = counterfactual_survival(null, data, 0)
    np.testing.assert_array_equal(s1.probs, s0.probs)


def test_zero_coefficients_give_breslow_survival(rng):
    data = random_dataset(rng, 100)
    fit = fit_cox(data, True, (0, 1))
    zero = replace(fit, coefficients=np.zeros(3))
    for a in (0, 1):
        np.testing.assert_allclose(counterfactual_survival(zero, data, a).probs, np.exp(-fit.baseline_cumhaz),
                                   rtol=1e-14)


def test_single_subject_plug_in(rng):
    data = random_dataset(rng, 50, p=1)
    fit = fit_cox(data, True, (0,))
    one = data.take([0])
    lp = math.log(2)
    model = replace(fit, coefficients=np.array([0.9, lp / one.covariates[0, 0]]))
    s = counterfactual_survival(model, one, 0)
    np.testing.assert_allclose(s.probs, np.exp(-2 * fit.baseline_cumhaz), rtol=1e-14)


def test_counterfactual_matches_explicit_average(rng):
    data = random_dataset(rng, 60)
    fit = fit_cox(data, True, (0, 1))
    for a in (0, 1):
        s = counterfactual_survival(fit, data, a)
        for j in (0, len(fit.baseline_times) // 2, len(fit.baseline_times) - 1):
            expected = np.mean([math.exp(-fit.baseline_cumhaz[j] * math.exp(fit.gamma * a + fit.beta @ row))
                                for row in data.covariates])
            assert s.probs[j] == pytest.approx(expected, rel=1e-12)


def test_counterfactual_requires_exposure_term(rng):
    data = random_dataset(rng, 40)
    fit = fit_cox(data, False, (0,))
    with pytest.raises(InputError):
        counterfactual_survival(fit, data, 1)


# ---------------------------------------------------------------- full estimators


def test_ipw_without_covariates_is_unadjusted_analysis(rng):
    data = random_dataset(rng, 120)
    est = ipw_estimate(data, (), 5.0)
    ones = np.ones(data.n)
    s1 = weighted_km(build_risk_table(data, ones, 1))
    s0 = weighted_km(build_risk_table(data, ones, 0))
    np.testing.assert_allclose(est.s1.probs, s1.probs, rtol=1e-14)
    assert est.rmst_diff == pytest.approx(rmst_difference(s1, s0, 5.0), abs=1e-12)
    assert est.log_ahr == pytest.approx(fit_cox(data).gamma, abs=1e-10)


def test_ipw_curves_match_weighted_product_limit(rng):
    data = random_dataset(rng, 40, ties=True)
    est = ipw_estimate(data, (0, 1), 4.0)
    w = stabilized_weights(data, (0, 1)).weights
    for curve, g in ((est.s1, 1), (est.s0, 0)):
        m = data.exposure == g
        expected = product_limit(list(data.time[m]), list(data.event[m]), list(w[m]))
        np.testing.assert_allclose(curve.probs, [s for _, s in expected], rtol=1e-12)


def test_gcomp_without_covariates_is_cox_survival_contrast(rng):
    data = random_dataset(rng, 120)
    est = gcomp_estimate(data, (), 5.0)
    fit = fit_cox(data)
    np.testing.assert_allclose(est.s1.probs, np.exp(-fit.baseline_cumhaz * math.exp(fit.gamma)), rtol=1e-13)
    np.testing.assert_allclose(est.s0.probs, np.exp(-fit.baseline_cumhaz), rtol=1e-13)
    # with a single proportional contrast every hazard ratio equals exp(gamma)
    assert est.log_ahr == pytest.approx(fit.gamma, abs=1e-6)


def test_estimators_reject_bad_tau(rng):
    data = random_dataset(rng, 40)
    for fn in (ipw_estimate, gcomp_estimate):
        with pytest.raises(InputError):
            fn(data, (0,), 0.0)


def test_methods_agree_when_exposure_is_randomized():
    data = simulate_cohort(20_000, math.log(1.3), 70.0, np.random.default_rng(12), randomized=True)
    tau = select_tau(data)
    subset = COVARIATE_SETS["risk_factors"]
    ipw = ipw_estimate(data, subset, tau)
    gc = gcomp_estimate(data, subset, tau)
    unadjusted = ipw_estimate(data, (), tau)
    assert abs(ipw.log_ahr - unadjusted.log_ahr) < 0.03
    assert abs(ipw.rmst_diff - unadjusted.rmst_diff) < 0.2
    assert abs(gc.log_ahr - ipw.log_ahr) < 0.05
    assert abs(gc.rmst_diff - ipw.rmst_diff) < 0.3


@pytest.fixture(scope="module")
def large_cohort():
    return simulate_cohort(100_000, math.log(1.3), 70.0, np.random.default_rng(2024))


@pytest.fixture(scope="module")
def large_null_cohort():
    return simulate_cohort(100_000, 0.0, 70.0, np.random.default_rng(2025))


@pytest.mark.slow
def test_ipw_large_sample_hits_theoretical_values(large_cohort):
    est = ipw_estimate(large_cohort, COVARIATE_SETS["confounders"], 36.8)
    assert abs(est.log_ahr - 0.210) < 0.05
    assert abs(est.rmst_diff - (-1.890)) < 0.3


@pytest.mark.slow
def test_gcomp_large_sample_hits_theoretical_value(large_cohort):
    est = gcomp_estimate(large_cohort, COVARIATE_SETS["risk_factors"], 36.8)
    assert abs(est.log_ahr - 0.210) < 0.05


@pytest.mark.slow
def test_gcomp_large_sample_null(large_null_cohort):
    tau = select_tau(large_null_cohort)
    est = gcomp_estimate(large_null_cohort, COVARIATE_SETS["risk_factors"], tau)
    assert abs(est.log_ahr) < 0.05
    assert abs(est.rmst_diff) < 0.3
