import re

import numpy as np
import pytest

from ravine.objective import QuadraticSpec, make_ill_conditioned_2d, make_quadratic

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def scalar():
    """f(x) = x^2 / 2 in one dimension."""
    return make_quadratic(QuadraticSpec([[1.0]], [0.0]), name="half_square")


@pytest.fixture
def cond100():
    return make_ill_conditioned_2d(100)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda ln: int(re.search(r"criterion (\d+)", ln).group(1))):
            terminalreporter.write_line(line)
