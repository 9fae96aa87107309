import math

import numpy as np
import pytest
from hypothesis import settings

from bnlslab import suites
from bnlslab.grid import Field, make_grid

settings.register_profile("pkg", deadline=None, max_examples=40, derandomize=True)
settings.load_profile("pkg")

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def desk_grid():
    return make_grid(1, 256, 32 * math.pi)


@pytest.fixture(scope="session")
def profile_grid():
    return make_grid(1, 512, 32 * math.pi)


@pytest.fixture(scope="session")
def grid2d():
    return make_grid(2, 128, 16 * math.pi)


@pytest.fixture(scope="session")
def q3():
    return suites.profile("qp", 3.0)


@pytest.fixture(scope="session")
def q5():
    return suites.profile("qp", 5.0)


@pytest.fixture(scope="session")
def qstar():
    return suites.profile("qstar", 9.0)


@pytest.fixture(scope="session")
def gs3(desk_grid):
    """(VP) minimizer, d = 1, p = 3, mu = 0."""
    return suites.ground_state(3.0, 0.0)


def gaussian(grid, width=1.0, amp=1.0, center=0.0):
    return Field(grid, amp * np.exp(-sum((x - center) ** 2 for x in grid.coords) / (2 * width**2)) + 0j)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
