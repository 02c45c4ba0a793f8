"""Shared fixtures and builders for the test suite."""

import numpy as np
import pytest

from genwave.nets import EpsilonGrid, GeneralizedNumber, make_indicator
from genwave.linalg import GenVector


@pytest.fixture(scope="session")
def grid():
    return EpsilonGrid()


@pytest.fixture(scope="session")
def small_grid():
    """Cheaper grid for epsilon-wise high-precision operations."""
    return EpsilonGrid(k=16, tail_window=8)


@pytest.fixture(scope="session")
def cs_grid():
    """Grid for sweeps with eps**(+-1) entries: keeps |u|^2 * 1e-16 well
    below the squared timelike margin, so norms of huge vectors stay
    resolvable in double precision."""
    return EpsilonGrid(k=24, tail_window=10)


@pytest.fixture(scope="session")
def chi_even(grid):
    return make_indicator(lambda k: k % 2 == 0, grid)


@pytest.fixture(scope="session")
def chi_odd(grid):
    return make_indicator(lambda k: k % 2 == 1, grid)


def random_timelike(rng, grid, n=4, power_entries=False, max_exp=1.0):
    """Future-pointing timelike vector with Minkowski norm exactly -s^2."""
    if power_entries:
        a = rng.uniform(-max_exp, max_exp, size=n - 1)
        c = rng.uniform(-2, 2, size=n - 1)
        spatial = np.stack([c[i] * grid.samples ** a[i] for i in range(n - 1)], axis=1)
    else:
        spatial = np.tile(rng.uniform(-2, 2, size=n - 1), (grid.k, 1))
    s = rng.uniform(0.5, 2.0)
    t = np.sqrt(s**2 + np.sum(spatial**2, axis=1))
    return GenVector(grid, np.column_stack([t, spatial]))


def power_net_values(grid, c, a):
    return c * grid.samples**a
