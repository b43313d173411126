
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from causal_survival import EstimationError, InputError
from causal_survival.survival_core import (
    StepSurvival,
    SurvivalDataset,
    build_risk_table,
    rmst,
    rmst_difference,
    select_tau,
    weighted_km,
)

from conftest import random_dataset
from oracles import product_limit, riemann_area, tau_by_enumeration


def one_group(time, event, group=1):
    n = len(time)
    return SurvivalDataset(time, event, [group] * n, np.zeros((n, 0)))


# ---------------------------------------------------------------- dataset


def test_dataset_rejects_bad_rows():
    with pytest.raises(InputError):
        SurvivalDataset([1, 2], [1, 2], [0, 1], np.zeros((2, 0)))
    with pytest.raises(InputError):
        SurvivalDataset([1, -2], [1, 0], [0, 1], np.zeros((2, 0)))
    with pytest.raises(InputError):
        SurvivalDataset([1, 2], [1, 0], [0, 1], np.zeros((3, 1)))
    with pytest.raises(InputError):
        SurvivalDataset([1, np.nan], [1, 0], [0, 1], np.zeros((2, 0)))


def test_dataset_arrays_are_read_only_and_take_preserves_rows(rng):
    data = random_dataset(rng, 10)
    with pytest.raises(ValueError):
        data.time[0] = 5.0
    sub = data.take([3, 3, 0])
    assert sub.n == 3
    np.testing.assert_array_equal(sub.time, data.time[[3, 3, 0]])
    np.testing.assert_array_equal(sub.covariates, data.covariates[[3, 3, 0]])
    assert sub.covariate_names == data.covariate_names


def test_from_records_and_covariate_lookup():
    data = SurvivalDataset.from_records([(1.0, 1, 0, (0.5, 1.0)), (2.0, 0, 1, (0.1, 0.0))], ("age", "sex"))
    assert data.p == 2
    assert data.covariate_index(["sex"]) == [1]
    with pytest.raises(InputError):
        data.covariate_index(["bmi"])


# ---------------------------------------------------------------- risk table


def test_risk_table_hand_counts():
    table = build_risk_table(one_group([1, 2, 3], [1, 0, 1]), np.ones(3), 1)
    np.testing.assert_array_equal(table.times, [1, 3])
    np.testing.assert_array_equal(table.events, [1, 1])
    np.testing.assert_array_equal(table.at_risk, [3, 1])


def test_risk_table_weighted_sum():
    table = build_risk_table(one_group([1, 2], [1, 0]), np.array([2.0, 1.0]), 1)
    assert table.times[0] == 1
    assert table.events[0] == 2
    assert table.at_risk[0] == 3


def test_risk_table_empty_group():
    with pytest.raises(InputError, match="group has no observations"):
        build_risk_table(one_group([1, 2], [1, 0], group=1), np.ones(2), 0)


def test_risk_table_unit_weights_match_integer_counts(rng):
    data = random_dataset(rng, 40, ties=True)
    for g in (0, 1):
        table = build_risk_table(data, np.ones(data.n), g)
        m = data.exposure == g
        for t, d, y in zip(table.times, table.events, table.at_risk):
            assert d == np.sum((data.time[m] == t) & (data.event[m] == 1))
            assert y == np.sum(data.time[m] >= t)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.booleans())
def test_risk_table_invariants(seed, ties):
    data, w = random_dataset(np.random.default_rng(seed), 25, ties=ties, weights=True)
    for g in (0, 1):
        table = build_risk_table(data, w, g)
        assert np.all(np.diff(table.times) > 0)
        assert np.all(np.diff(table.at_risk) <= 1e-12)
        assert np.all(table.events >= 0)
        assert np.all(table.events <= table.at_risk + 1e-12)


# ---------------------------------------------------------------- Kaplan-Meier


def test_km_hand_example():
    surv = weighted_km(build_risk_table(one_group([1, 2, 3], [1, 0, 1]), np.ones(3), 1))
    assert surv(1) == pytest.approx(2 / 3, abs=1e-15)
    assert surv(3) == 0.0
    assert surv(0.5) == 1.0


def test_km_no_events_is_one():
    surv = weighted_km(build_risk_table(one_group([1, 2, 3], [0, 0, 0]), np.ones(3), 1))
    assert np.all(surv(np.linspace(0, 10, 50)) == 1.0)


def test_km_without_censoring_is_empirical_fraction(rng):
    time = rng.exponential(3.0, 30)
    surv = weighted_km(build_risk_table(one_group(time, np.ones(30, dtype=int)), np.ones(30), 1))
    for t in np.concatenate((time, rng.uniform(0, 10, 20))):
        assert surv(t) == pytest.approx(np.mean(time > t), abs=1e-12)


GOLDEN_TIME = [2, 3, 3, 5, 6, 6, 6, 8, 9, 10, 11, 12, 12, 14, 15, 17, 18, 20, 21, 25]
GOLDEN_EVENT = [1, 1, 0, 1, 1, 1, 0, 0, 1, 0, 1, 1, 1, 0, 1, 0, 1, 0, 1, 1]


def test_km_matches_product_limit_on_20_rows_exactly():
    data = one_group(GOLDEN_TIME, GOLDEN_EVENT)
    surv = weighted_km(build_risk_table(data, np.ones(20), 1))
    expected = product_limit(GOLDEN_TIME, GOLDEN_EVENT)
    np.testing.assert_array_equal(surv.times, [t for t, _ in expected])
    np.testing.assert_allclose(surv.probs, [s for _, s in expected], rtol=1e-14, atol=0)


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 10_000), st.booleans(), st.integers(2, 20))
def test_weighted_km_matches_product_limit(seed, ties, n):
    rng = np.random.default_rng(seed)
    data, w = random_dataset(rng, n, ties=ties, weights=True)
    for g in (0, 1):
        m = data.exposure == g
        expected = product_limit(list(data.time[m]), list(data.event[m]), list(w[m]))
        surv = weighted_km(build_risk_table(data, w, g))
        assert len(expected) == surv.times.size
        for (t, s), t_hat, s_hat in zip(expected, surv.times, surv.probs):
            assert t == t_hat
            assert s_hat == pytest.approx(max(s, 0.0), rel=1e-12, abs=1e-14)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_km_curve_invariants(seed):
    data, w = random_dataset(np.random.default_rng(seed), 30, ties=True, weights=True)
    surv = weighted_km(build_risk_table(data, w, 1))
    assert np.all(np.diff(surv.probs) <= 0)
    assert np.all((surv.probs >= 0) & (surv.probs <= 1))
    if surv.times.size:
        assert surv(surv.times[0] - 1e-9) == 1.0


def test_step_survival_validation():
    with pytest.raises(InputError):
        StepSurvival([1.0, 1.0], [0.9, 0.8])
    with pytest.raises(InputError):
        StepSurvival([1.0, 2.0], [0.8, 0.9])
    with pytest.raises(InputError):
        StepSurvival([1.0], [1.5])


# ---------------------------------------------------------------- RMST


def test_rmst_full_survival():
    assert rmst(StepSurvival([], []), 5.0) == 5.0


def test_rmst_two_rectangles():
    assert rmst(StepSurvival([1.0], [0.5]), 2.0) == 1.5


def test_rmst_zero_survival():
    assert rmst(StepSurvival([0.0], [0.0]), 7.3) == 0.0


def test_rmst_rejects_non_positive_tau():
    with pytest.raises(InputError):
        rmst(StepSurvival([1.0], [0.5]), 0.0)


def test_rmst_difference_examples():
    s = StepSurvival([1.0, 2.0], [0.7, 0.2])
    assert rmst_difference(s, s, 3.0) == 0.0
    assert rmst_difference(StepSurvival([], []), StepSurvival([0.0], [0.0]), 3.0) == 3.0


def _dyadic_curve(data):
    """Curve on a dyadic grid so the step area is exact in floating point."""
    times = np.unique(np.asarray(data, dtype=float))
    probs = np.linspace(1.0, 0.0, times.size + 1)[1:]
    probs = np.round(probs * 64) / 64
    return StepSurvival(times, probs)


@settings(max_examples=80, deadline=None)
@given(st.lists(st.integers(1, 40), min_size=1, max_size=12), st.integers(1, 48))
def test_rmst_step_area_exact(grid, tau_quarters):
    surv = _dyadic_curve([g / 4 for g in grid])
    tau = tau_quarters / 4
    # brute-force: sum over quarter-unit cells, each fully inside one step
    expected = sum(surv((k + 0.5) / 4) * 0.25 for k in range(tau_quarters))
    assert rmst(surv, tau) == expected


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.5, 12.0))
def test_rmst_antisymmetry(seed, tau):
    data = random_dataset(np.random.default_rng(seed), 20)
    s1 = weighted_km(build_risk_table(data, np.ones(data.n), 1))
    s0 = weighted_km(build_risk_table(data, np.ones(data.n), 0))
    assert rmst_difference(s1, s0, tau) == -rmst_difference(s0, s1, tau)


def test_rmst_agrees_with_riemann_sum(rng):
    data = random_dataset(rng, 30)
    surv = weighted_km(build_risk_table(data, np.ones(data.n), 1))
    assert rmst(surv, 6.0) == pytest.approx(riemann_area(surv, 6.0, dt=1e-5), abs=1e-4)


# ---------------------------------------------------------------- tau


def test_select_tau_everyone_late():
    rng = np.random.default_rng(3)
    time = 5 + rng.uniform(0, 10, 20)
    data = SurvivalDataset(time, rng.integers(0, 2, 20), [0] * 10 + [1] * 10, np.zeros((20, 0)))
    assert select_tau(data) >= 5


def test_select_tau_enumerated_fixture():
    rng = np.random.default_rng(8)
    time = np.round(rng.uniform(1, 30, 20), 2)
    exposure = [0] * 10 + [1] * 10
    data = SurvivalDataset(time, rng.integers(0, 2, 20), exposure, np.zeros((20, 0)))
    # fraction 0.1 of 10 subjects: one subject still at risk, i.e. each group's largest time
    assert select_tau(data, 0.10) == min(time[:10].max(), time[10:].max())
    assert select_tau(data, 0.10) == tau_by_enumeration(list(time), exposure, 0.10)


def test_select_tau_full_fraction():
    rng = np.random.default_rng(9)
    time = rng.uniform(1, 30, 20)
    exposure = np.array([0] * 10 + [1] * 10)
    data = SurvivalDataset(time, np.ones(20, dtype=int), exposure, np.zeros((20, 0)))
    assert select_tau(data, 1.0) == min(time[:10].min(), time[10:].min())


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([0.05, 0.1, 0.25, 0.5]), st.integers(4, 40))
def test_select_tau_matches_enumeration(seed, fraction, n):
    data = random_dataset(np.random.default_rng(seed), n, ties=bool(seed % 2))
    expected = tau_by_enumeration(list(data.time), list(data.exposure), fraction)
    assert select_tau(data, fraction) == expected


def test_select_tau_errors():
    data = SurvivalDataset([0.0, 0.0, 1.0], [1, 0, 1], [0, 0, 1], np.zeros((3, 0)))
    with pytest.raises(EstimationError, match="tau undefined"):
        select_tau(data, 1.0)
    with pytest.raises(InputError):
        select_tau(one_group([1, 2], [1, 1]))
    with pytest.raises(InputError):
        select_tau(data, 0.0)


def test_select_tau_fraction_rounding_guard():
    # 0.07 * 100 evaluates to 7.000000000000001; seven subjects at risk must suffice
    assert 0.07 * 100 > 7
    time = np.arange(1, 201, dtype=float)
    data = SurvivalDataset(time, np.ones(200, dtype=int), np.repeat([0, 1], 100), np.zeros((200, 0)))
    assert select_tau(data, 0.07) == 94.0
