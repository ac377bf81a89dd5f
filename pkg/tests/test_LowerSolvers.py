import numpy as np
import pytest

from bilevellearn import GridCore
from bilevellearn import LowerSolvers
from bilevellearn import Regularizers
from bilevellearn.Errors import DomainError, ParameterError
from bilevellearn.GridCore import Domain, Grid, GridSignal
from bilevellearn.LowerSolvers import SolverConfig
from bilevellearn.Regularizers import BaseRegularizer, DoubleIntegrand, ExtendedParam, FamilySpec, PhiSpec, RhoSpec


def energy(family, param, w, u_eta):
    return GridCore.l2_distance_sq(w, u_eta) + Regularizers.eval_family(family, param, w)


@pytest.fixture
def step():
    grid = Grid(Domain.interval(0.0, 1.0), 64)
    return GridSignal.from_function(grid, lambda x: np.where(x < 0.5, 0.0, 1.0))


def test_solver_config_validation():
    with pytest.raises(ParameterError):
        SolverConfig(tol=0.0)
    with pytest.raises(ParameterError):
        SolverConfig(step_rule='newton')
    with pytest.raises(ParameterError):
        SolverConfig.from_json({'max_iter': 10})
    cfg = SolverConfig.from_json({'max_iters': 50, 'seed': 3})
    assert SolverConfig.from_json(cfg.to_json()) == cfg


def test_quadratic_weight_closed_form(ramp):
    res = LowerSolvers.solve_quadratic_weight(0.5, ramp)
    assert np.allclose(res.minimizer.values, ramp.values / 1.5)
    assert res.residual < 1e-12
    with pytest.raises(ParameterError):
        LowerSolvers.solve_quadratic_weight(-1.0, ramp)


def test_tv_on_a_step_shrinks_both_levels(step):
    res = LowerSolvers.solve_tv(0.1, step)
    values = res.minimizer.values
    assert res.method == 'taut-string'
    assert res.converged
    assert np.allclose(values[:32], 0.1, atol=1e-10)
    assert np.allclose(values[32:], 0.9, atol=1e-10)


def test_tv_large_weight_gives_the_mean(step):
    res = LowerSolvers.solve_tv(10.0, step)
    assert np.allclose(res.minimizer.values, 0.5, atol=1e-12)


def test_tv_minimizer_beats_perturbations(rng):
    grid = Grid(Domain.interval(0.0, 1.0), 48)
    u_eta = GridSignal(grid, rng.normal(size=grid.size))
    family = FamilySpec.weight(BaseRegularizer('TV'))
    param = ExtendedParam.interior(0.05)
    res = LowerSolvers.solve_family(family, param, u_eta)
    best = energy(family, param, res.minimizer, u_eta)
    assert res.objective == pytest.approx(best, rel=1e-12)
    for _ in range(20):
        w = res.minimizer + GridSignal(grid, rng.normal(0.0, 1e-3, grid.size))
        assert best <= energy(family, param, w, u_eta) + 1e-12


@pytest.mark.parametrize('points', [64, 256, 1024])
@pytest.mark.parametrize('weight', [0.1, 0.3, 0.6])
def test_tv_on_a_ramp_is_certified(points, weight):
    grid = Grid(Domain.interval(0.0, 1.0), points)
    ramp = GridSignal.from_function(grid, lambda x: x)
    res = LowerSolvers.solve_tv(weight, ramp)
    assert res.converged
    values = res.minimizer.values
    assert np.all(np.diff(values) >= -1e-12)
    assert values[0] > ramp.values[0] and values[-1] < ramp.values[-1]
    assert np.allclose(values.mean(), ramp.values.mean(), atol=1e-12)


@pytest.mark.parametrize('base', ['TV', 'QuadraticL2'])
def test_weight_fidelity_grows_with_the_weight(sine_training, base):
    clean, noisy = sine_training.pairs[0]
    family = FamilySpec.weight(BaseRegularizer(base))
    fidelity = []
    for alpha in np.geomspace(1e-4, 10.0, 16):
        res = LowerSolvers.solve_family(family, ExtendedParam.interior(float(alpha)), noisy)
        assert res.converged
        fidelity.append(GridCore.l2_distance_sq(res.minimizer, noisy))
    assert all(a <= b + 1e-12 for a, b in zip(fidelity, fidelity[1:]))
    assert fidelity[0] < fidelity[-1]


def test_tv_in_2d_agrees_with_perturbations(rng):
    grid = Grid(Domain.rect(0.0, 1.0, 0.0, 1.0), 12)
    u_eta = GridSignal(grid, rng.normal(size=grid.size))
    res = LowerSolvers.solve_tv(0.02, u_eta, SolverConfig(max_iters=20000, tol=1e-10))
    assert res.method == 'dual-fista'
    family = FamilySpec.weight(BaseRegularizer('TV'))
    param = ExtendedParam.interior(0.02)
    best = energy(family, param, res.minimizer, u_eta)
    for _ in range(10):
        w = res.minimizer + GridSignal(grid, rng.normal(0.0, 1e-2, grid.size))
        assert best <= energy(family, param, w, u_eta) + 1e-8


def test_lipschitz_model(ramp):
    u_eta = ramp * 3.0
    res = LowerSolvers.solve_lipschitz(0.05, u_eta)
    lip = GridCore.lipschitz_constant(res.minimizer)
    assert lip <= 3.0 + 1e-6
    value = GridCore.l2_distance_sq(res.minimizer, u_eta) + 0.05 * lip
    assert value <= 0.05 * 3.0 + 1e-6
    mean = GridSignal.constant(ramp.grid, GridCore.mean_value(u_eta))
    assert value <= GridCore.l2_distance_sq(mean, u_eta)
    with pytest.raises(DomainError):
        LowerSolvers.solve_lipschitz(0.1, GridSignal.constant(Grid(Domain.rect(0, 1, 0, 1), 4), 0.0))


def test_weight_edges(ramp):
    family = FamilySpec.weight(BaseRegularizer('TV'))
    lower = LowerSolvers.solve_family(family, ExtendedParam.lower(), ramp)
    assert np.array_equal(lower.minimizer.values, ramp.values)
    upper = LowerSolvers.solve_family(family, ExtendedParam.upper(), ramp)
    assert np.allclose(upper.minimizer.values, GridCore.mean_value(ramp))
    quad = FamilySpec.weight(BaseRegularizer('QuadraticL2'))
    assert np.all(LowerSolvers.solve_family(quad, ExtendedParam.upper(), ramp).minimizer.values == 0.0)


def test_nonlocal_edges(ramp):
    ak = FamilySpec.aubert_kornprobst(RhoSpec('BallIndicator', 1))
    upper = LowerSolvers.solve_family(ak, ExtendedParam.upper(), ramp)
    assert upper.method == 'edge-identity'
    lower = LowerSolvers.solve_family(ak, ExtendedParam.lower(), ramp)
    assert np.allclose(lower.minimizer.values, LowerSolvers.solve_tv(1.0, ramp).minimizer.values)
    bn = FamilySpec.brezis_nguyen(PhiSpec('QuadCap'))
    with pytest.raises(ParameterError):
        LowerSolvers.solve_family(bn, ExtendedParam.lower(), ramp)


def test_ak_solve_lowers_the_energy(rng):
    grid = Grid(Domain.interval(0.0, 1.0), 32)
    u_eta = GridSignal(grid, 5.0 * np.linspace(0.0, 1.0, 32) + rng.normal(0.0, 0.1, 32))
    family = FamilySpec.aubert_kornprobst(RhoSpec('BallIndicator', 1))
    param = ExtendedParam.interior(0.3)
    res = LowerSolvers.solve_family(family, param, u_eta)
    best = energy(family, param, res.minimizer, u_eta)
    assert best == pytest.approx(res.objective, rel=1e-12)
    assert best <= energy(family, param, u_eta, u_eta) + 1e-9
    mean = GridSignal.constant(grid, GridCore.mean_value(u_eta))
    assert best <= energy(family, param, mean, u_eta)


def test_exponent_solves(rng):
    grid = Grid(Domain.interval(0.0, 1.0), 24)
    u_eta = GridSignal(grid, rng.normal(size=24))
    family = FamilySpec.exponent(DoubleIntegrand.weighted_abs_diff())
    for param in (ExtendedParam.interior(1.0), ExtendedParam.interior(2.0), ExtendedParam.upper()):
        res = LowerSolvers.solve_family(family, param, u_eta, SolverConfig(max_iters=500))
        assert energy(family, param, res.minimizer, u_eta) <= energy(family, param, u_eta, u_eta) + 1e-12


def test_bn_local_solve_lowers_the_energy(ramp):
    family = FamilySpec.brezis_nguyen(PhiSpec('QuadCap'))
    param = ExtendedParam.interior(0.2)
    u_eta = ramp + GridSignal(ramp.grid, 0.05 * np.sin(40 * ramp.grid.axes[0]))
    res = LowerSolvers.solve_family(family, param, u_eta, SolverConfig(max_iters=300, restarts=2))
    assert res.method == 'gradient-multistart'
    assert energy(family, param, res.minimizer, u_eta) <= energy(family, param, u_eta, u_eta) + 1e-12


def test_constant_data_is_its_own_reconstruction(unit_grid):
    c = GridSignal.constant(unit_grid, 0.7)
    res = LowerSolvers.solve_tv(0.3, c)
    assert res.method == 'identity'
    assert res.objective == 0.0
