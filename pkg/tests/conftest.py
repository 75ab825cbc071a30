import numpy as np
import pytest
from hypothesis import settings

from innout.problem import Dims, make_problem_setting, random_covariate_shift

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")

# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def setting():
    base = make_problem_setting(Dims(6, 2, 2, 3), 7, 2.0, sigma_sq=0.1, sigma_u_sq=1.0)
    return random_covariate_shift(base, 8)
