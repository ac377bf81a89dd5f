import math

import numpy as np
import pytest

from bilevellearn import GridCore
from bilevellearn.Errors import DomainError, GridMismatchError, QuadratureError
from bilevellearn.GridCore import Domain, Grid, GridSignal, TrainingSet


def test_domain_measures():
    d = Domain.rect(0.0, 2.0, -1.0, 1.0)
    assert d.dim == 2
    assert d.kind == 'Rect'
    assert d.measure == pytest.approx(4.0)
    assert d.diameter == pytest.approx(math.sqrt(8.0))


@pytest.mark.parametrize('bounds', [((1.0, 1.0),), ((0.0, 1.0),) * 3, ((2.0, 0.0), (0.0, 1.0))])
def test_domain_rejects_bad_bounds(bounds):
    with pytest.raises(DomainError):
        Domain(bounds)


def test_grid_nodes_are_cell_centres():
    grid = Grid(Domain.interval(0.0, 1.0), 4)
    assert np.allclose(grid.axes[0], [0.125, 0.375, 0.625, 0.875])
    assert grid.h == pytest.approx(0.25)
    grid2 = Grid(Domain.rect(0.0, 1.0, 0.0, 2.0), (2, 4))
    assert grid2.nodes.shape == (8, 2)
    assert grid2.cell_volume == pytest.approx(0.25)


def test_signal_checks_size_and_values(unit_grid):
    with pytest.raises(GridMismatchError):
        GridSignal(unit_grid, np.zeros(10))
    values = np.zeros(unit_grid.size)
    values[3] = np.nan
    with pytest.raises(ValueError):
        GridSignal(unit_grid, values)


def test_signals_on_different_grids(unit_grid, ramp):
    other = GridSignal.constant(Grid(Domain.interval(0.0, 2.0), 64), 1.0)
    with pytest.raises(GridMismatchError):
        GridCore.l2_inner(ramp, other)
    with pytest.raises(GridMismatchError):
        TrainingSet.single(ramp, other)


def test_l2_quantities():
    grid = Grid(Domain.interval(0.0, 2.0), 50)
    one = GridSignal.constant(grid, 1.0)
    assert GridCore.l2_norm_sq(one) == pytest.approx(2.0)
    assert GridCore.l2_distance_sq(one * 3.0, one) == pytest.approx(8.0)
    assert GridCore.mean_value(one * 5.0) == pytest.approx(5.0)
    assert GridCore.is_constant(one)


def test_tv_and_lipschitz_of_a_ramp(unit_grid, ramp):
    n = unit_grid.size
    assert GridCore.tv_discrete(ramp) == pytest.approx(1.0 - 1.0 / n)
    assert GridCore.lipschitz_constant(ramp * 3.0) == pytest.approx(3.0)


def test_tv_and_lipschitz_in_2d():
    grid = Grid(Domain.rect(0.0, 1.0, 0.0, 1.0), 8)
    u = GridSignal.from_function(grid, lambda x, y: x)
    assert GridCore.tv_discrete(u) == pytest.approx(7.0 / 8.0)
    diag = GridSignal.from_function(grid, lambda x, y: x + y)
    assert GridCore.lipschitz_constant(diag) == pytest.approx(math.sqrt(2.0), rel=1e-12)


def test_double_integral_of_one_skips_the_diagonal(unit_grid, ramp):
    n = unit_grid.size
    for symmetric in (False, True):
        total = GridCore.double_integral(lambda x, y, xi, zeta: 1.0, ramp, symmetric=symmetric)
        assert total == pytest.approx(1.0 - 1.0 / n, rel=1e-13)


def test_double_integral_reports_the_bad_pair(ramp):
    def blows_up(x, y, xi, zeta):
        return np.where(np.abs(xi - zeta) > 0.5, np.inf, 1.0)

    with pytest.raises(QuadratureError) as err:
        GridCore.double_integral(blows_up, ramp)
    i, j = err.value.pair
    assert abs(ramp.values[i] - ramp.values[j]) > 0.5


def test_node_pairs_respects_max_distance():
    grid = Grid(Domain.interval(0.0, 1.0), 10)
    I, J, D = GridCore.node_pairs(grid, max_distance=0.25)
    assert I.size == 9 + 8
    assert np.all(D < 0.25)
    assert np.all(I < J)


def test_gagliardo_vanishes_on_constants(unit_grid):
    assert GridCore.gagliardo_seminorm(GridSignal.constant(unit_grid, 2.0), 2.0, 0.5) == 0.0
    with pytest.raises(ValueError):
        GridCore.gagliardo_seminorm(GridSignal.constant(unit_grid, 2.0), 0.5, 0.5)


def test_pair_max_is_the_largest_quotient(ramp):
    top = GridCore.pair_max(lambda x, y, xi, zeta: np.abs(xi - zeta), ramp, symmetric=True)
    assert top == pytest.approx(ramp.values[-1] - ramp.values[0])
