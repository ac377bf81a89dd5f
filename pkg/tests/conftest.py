import numpy as np
import pytest

from bilevellearn.GridCore import Domain, Grid, GridSignal, TrainingSet


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def unit_grid():
    return Grid(Domain.interval(0.0, 1.0), 64)


@pytest.fixture
def ramp(unit_grid):
    return GridSignal.from_function(unit_grid, lambda x: x)


def noisy_sine_training(seed, points=128, sigma=0.1):
    """ u_c = sin(2 pi x) on (0, 1) with Gaussian noise of level sigma. """
    grid = Grid(Domain.interval(0.0, 1.0), points)
    clean = GridSignal.from_function(grid, lambda x: np.sin(2 * np.pi * x))
    noise = np.random.default_rng(seed).normal(0.0, sigma, grid.size)
    return TrainingSet.single(clean, clean + GridSignal(grid, noise))


@pytest.fixture
def sine_training():
    return noisy_sine_training(7)
