import numpy as np
import pytest

from causal_survival.survival_core import SurvivalDataset

ACCEPTANCE_LINES: list[str] = []


def random_dataset(rng, n, p=2, ties=False, weights=False):
    time = rng.integers(1, 8, n).astype(float) if ties else rng.exponential(5.0, n).round(4) + 0.01
    event = rng.integers(0, 2, n)
    exposure = rng.integers(0, 2, n)
    exposure[0], exposure[1] = 0, 1
    cov = rng.normal(size=(n, p))
    data = SurvivalDataset(time, event, exposure, cov)
    if weights:
        return data, rng.uniform(0.2, 3.0, n)
    return data


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
