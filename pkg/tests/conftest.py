import numpy as np
import pytest

from hdsa.datagen import TrueModel, generate_dataset
from hdsa.hazard import KnotGrid


@pytest.fixture
def grid3():
    return KnotGrid(np.array([0.0, 1.0, 2.0, 3.0]))


@pytest.fixture(scope="session")
def default_grid():
    return KnotGrid.equispaced(0.0, 3.0, 12)


@pytest.fixture(scope="session")
def model():
    return TrueModel()


@pytest.fixture
def small_data(model):
    return generate_dataset(60, 8, model, np.random.default_rng(4))


# one line per acceptance criterion, collected by tests/test_acceptance.py
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
