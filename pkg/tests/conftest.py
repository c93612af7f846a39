import numpy as np
import pytest

from cones_es.belief import BeliefParams

ACCEPTANCE_LINES = []


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_params(rng, n, mean_scale=1.0, logvar_scale=1.0):
    return BeliefParams(rng.normal(0, mean_scale, n), rng.uniform(-logvar_scale, logvar_scale, n))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
