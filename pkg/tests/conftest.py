import json
import os

import numpy as np
import pytest

from sqrkit.basis import QuantileGrid
from sqrkit.io import load_engel, load_sunspots
from sqrkit.objective import SqrProblem

HERE = os.path.dirname(os.path.abspath(__file__))


@pytest.fixture(scope="session")
def oracle_data():
    with open(os.path.join(HERE, "data", "oracles.json")) as fh:
        return json.load(fh)


@pytest.fixture(scope="session")
def engel():
    return load_engel()


@pytest.fixture(scope="session")
def sunspots():
    return load_sunspots()[1]


def random_problem(seed, n=40, p=2, L=9, c=0.0, nknots=None, hetero=True):
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1, 1, size=(n, p - 1))
    X = np.column_stack([np.ones(n), x])
    scale = 0.5 + (x[:, 0] ** 2 if hetero and p > 1 else 0.0)
    y = X @ np.linspace(1.0, 0.5, p) + scale * rng.standard_normal(n)
    grid = QuantileGrid(np.linspace(0.1, 0.9, L))
    return SqrProblem.create(X, y, grid, c=c, nknots=nknots)


@pytest.fixture
def make_problem():
    return random_problem


# PASS/FAIL lines from the acceptance suite, repeated after the run so they
# are visible even with output capture on
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
