"""Shared fixtures and the --runslow switch for long recovery runs."""

import numpy as np
import pytest

from hamlearn.pauli import build_family
from hamlearn.simulator import random_states


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False,
                     help="run slow end-to-end recovery tests")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long end-to-end recovery run")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def zz_xx3():
    """Seeded 3-qubit ZZ+XX Hamiltonian."""
    return build_family("zz-xx", 3, seed=7)


@pytest.fixture
def states3():
    return random_states(3, 3, seed=11)
