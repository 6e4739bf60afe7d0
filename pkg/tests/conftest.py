import numpy as np
import pytest

from meddeconf.data import Cohort, ExposureMatrix


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def tiny_cohort():
    return Cohort(
        exposures=ExposureMatrix(np.array([[0.0, 1.0], [1.0, 0.0]]), binary=True),
        outcomes=np.array([0.1, -0.2]),
        cause_labels=("a", "b"),
    )


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
