import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from topt.data import make_rect, make_sinusoidal
from topt.grid import GridSpec
from topt.models import ProblemSpec, ReducedProblem

settings.register_profile("default", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# filled by test_acceptance; echoed in the terminal summary regardless of capture
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def grid32():
    return GridSpec(32, 32, 4)


@pytest.fixture(scope="session")
def grid64():
    return GridSpec(64, 64, 4)


@pytest.fixture(scope="session")
def rect_spec(grid64):
    m0, m1 = make_rect(64)
    return ProblemSpec("advection", 1e-3, m0, m1, grid64, gamma=1.0)


@pytest.fixture
def sinus_problem(grid32):
    m0, m1 = make_sinusoidal(32)
    return ReducedProblem(ProblemSpec("advection", 1e-2, m0, m1, grid32))
