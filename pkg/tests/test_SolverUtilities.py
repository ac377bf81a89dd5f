import math

import numpy as np
import pytest
from scipy import optimize

from bilevellearn import GridCore
from bilevellearn import SolverUtilities
from bilevellearn.GridCore import Domain, Grid, GridSignal


def test_taut_string_on_a_step():
    y = np.array([0.0] * 4 + [1.0] * 4)
    x = SolverUtilities.taut_string(y, 0.4)
    assert np.allclose(x, [0.1] * 4 + [0.9] * 4, atol=1e-12)
    assert SolverUtilities.tv_duality_gap(y, x, 0.4) < 1e-12


def test_taut_string_limits(rng):
    y = rng.normal(size=30)
    assert np.array_equal(SolverUtilities.taut_string(y, 0.0), y)
    assert np.allclose(SolverUtilities.taut_string(y, 1e3), y.mean())


def test_taut_string_agrees_with_the_dual_method(rng):
    y = rng.normal(size=20)
    grid = Grid(Domain.interval(0.0, 1.0), 20)
    graph = SolverUtilities.neighbour_graph(grid)
    exact = SolverUtilities.taut_string(y, 0.3)
    dual = SolverUtilities.dual_box_fista(y, graph, np.full(graph.edges, 0.3), max_iters=20000, tol=1e-13)
    assert np.max(np.abs(dual.x - exact)) < 1e-3


def _tv_objective(y, x, lam):
    return 0.5 * float(np.sum((x - y) ** 2)) + lam * float(np.sum(np.abs(np.diff(x))))


def _bounded_dual_solve(y, lam):
    n = y.size

    def dt(p):
        return np.concatenate(([0.0], p)) - np.concatenate((p, [0.0]))

    def fun(p):
        r = y - dt(p)
        # gradient of 0.5 |y - Dt p|^2 is -D r, D the forward difference
        return 0.5 * float(np.dot(r, r)), -np.diff(r)

    run = optimize.minimize(fun, np.zeros(n - 1), jac=True, method='L-BFGS-B', bounds=[(-lam, lam)] * (n - 1),
                            options={'maxiter': 50000, 'ftol': 1e-16, 'gtol': 1e-13})
    return y - dt(run.x)


@pytest.mark.parametrize('n, lam', [(8, 0.3), (200, 2.0), (57, 0.05)])
def test_taut_string_matches_a_bounded_dual_solve(rng, n, lam):
    y = rng.normal(size=n)
    x = SolverUtilities.taut_string(y, lam)
    reference = _bounded_dual_solve(y, lam)
    best = _tv_objective(y, x, lam)
    assert best <= _tv_objective(y, reference, lam) + 1e-10
    assert best == pytest.approx(_tv_objective(y, reference, lam), rel=1e-5)
    assert SolverUtilities.tv_duality_gap(y, x, lam) <= 1e-9 * max(1.0, best)


@pytest.mark.parametrize('lam', [20.0, 0.3 * 1024 / 2])
def test_taut_string_on_a_fine_ramp(lam):
    n = 1024
    y = (np.arange(n) + 0.5) / n
    x = SolverUtilities.taut_string(y, lam)
    assert y.min() - 1e-12 <= x.min() and x.max() <= y.max() + 1e-12
    assert np.all(np.diff(x) >= -1e-12)
    assert SolverUtilities.tv_duality_gap(y, x, lam) <= 1e-9 * max(1.0, _tv_objective(y, x, lam))
    assert _tv_objective(y, x, lam) <= _tv_objective(y, _bounded_dual_solve(y, lam), lam) + 1e-10


def test_pair_graph_adjoint(rng):
    grid = Grid(Domain.rect(0.0, 1.0, 0.0, 1.0), 5)
    graph = SolverUtilities.pair_graph(grid, lambda x, y, d: 1.0 / d, max_distance=0.45)
    u = rng.normal(size=grid.size)
    q = rng.normal(size=graph.edges)
    assert np.dot(graph.D(u), q) == pytest.approx(np.dot(u, graph.Dt(q)))


def test_neighbour_graph_weights_give_the_discrete_tv(rng):
    grid = Grid(Domain.rect(0.0, 1.0, 0.0, 2.0), (6, 9))
    u = GridSignal(grid, rng.normal(size=grid.size))
    graph = SolverUtilities.neighbour_graph(grid)
    assert graph.weighted_abs_sum(u.values) == pytest.approx(GridCore.tv_discrete(u))


def test_lipschitz_projection():
    res = SolverUtilities.project_lipschitz([0.0, 1.0], 0.2)
    assert res.converged
    assert np.allclose(res.x, [0.4, 0.6], atol=1e-8)
    feasible = np.array([0.0, 0.1, 0.15, 0.1])
    assert np.allclose(SolverUtilities.project_lipschitz(feasible, 0.2).x, feasible)


def test_lipschitz_projection_is_feasible(rng):
    y = rng.normal(size=40)
    res = SolverUtilities.project_lipschitz(y, 0.05)
    assert np.max(np.abs(np.diff(res.x))) <= 0.05 + 1e-9
    assert res.x.mean() == pytest.approx(y.mean(), abs=1e-8)


def test_golden_section():
    x, v, evals = SolverUtilities.golden_section(lambda t: (t - 2.0) ** 2, 0.0, 5.0)
    assert x == pytest.approx(2.0, abs=1e-6)
    assert v == min(e[1] for e in evals)
    x, _, evals = SolverUtilities.golden_section(lambda t: t, 1.0, 1.0)
    assert x == 1.0 and len(evals) == 1


def test_descent_loops():
    c = np.array([1.0, -2.0, 3.0])
    run = SolverUtilities.armijo_descent(lambda x: 0.5 * float(np.dot(x - c, x - c)), lambda x: x - c,
                                         np.zeros(3), tol=1e-10)
    assert run.converged
    assert np.allclose(run.x, c)

    def objective(x):
        return math.fsum(np.abs(x - c))

    start = objective(np.zeros(3))
    run = SolverUtilities.polyak_descent(objective, lambda x: np.sign(x - c), np.zeros(3), max_iters=500)
    assert run.value <= start
    assert run.value == pytest.approx(objective(run.x))
