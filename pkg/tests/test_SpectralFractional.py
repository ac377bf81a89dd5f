import math

import numpy as np
import pytest

from bilevellearn import LowerSolvers
from bilevellearn import Regularizers
from bilevellearn import SpectralFractional
from bilevellearn.Demos import fractional_window_data
from bilevellearn.Errors import DomainError, ParameterError
from bilevellearn.GridCore import Domain, Grid, GridSignal
from bilevellearn.Regularizers import ExtendedParam, FamilySpec


@pytest.fixture
def half_wave():
    grid = Grid(Domain.interval(0.0, math.pi), 80)
    return grid, SpectralFractional.build_basis(grid.domain, 16)


def test_basis_needs_the_zero_pi_domain():
    with pytest.raises(DomainError):
        SpectralFractional.build_basis(Domain.interval(0.0, 1.0), 8)


def test_basis_eigenvalues_are_sorted():
    basis = SpectralFractional.build_basis(Domain.rect(0.0, math.pi, 0.0, math.pi), 4)
    assert basis.size == 16
    assert np.all(np.diff(basis.eigenvalues) >= 0)
    assert basis.indices[:3] == ((1, 1), (1, 2), (2, 1))


def test_modes_analyze_to_unit_vectors(half_wave):
    grid, basis = half_wave
    for k in (0, 5, 15):
        c = SpectralFractional.analyze(basis.mode(grid, k), basis).coeffs
        expected = np.zeros(basis.size)
        expected[k] = 1.0
        assert np.allclose(c, expected, atol=1e-12)


def test_grid_must_resolve_the_basis(half_wave):
    _, basis = half_wave
    coarse = Grid(Domain.interval(0.0, math.pi), 16)
    with pytest.raises(DomainError):
        basis.check_grid(coarse)
    with pytest.raises(ParameterError):
        SpectralFractional.synthesize(SpectralFractional.SpectralCoeffs(basis, np.zeros(basis.size)))


def test_minimizer_closed_form(half_wave, rng):
    grid, basis = half_wave
    c = SpectralFractional.SpectralCoeffs(basis, rng.normal(size=basis.size), grid)
    w = SpectralFractional.frac_minimizer(c, 0.4, 0.2)
    assert np.allclose(w.coeffs, c.coeffs / (1.0 + 0.2 * basis.eigenvalues ** 0.4))
    with pytest.raises(ParameterError):
        SpectralFractional.frac_seminorm_sq(c, 1.5, 0.2)


def test_seminorm_of_a_mode(half_wave):
    grid, basis = half_wave
    family = FamilySpec.spectral_fractional(0.1, M_max=16)
    u = basis.mode(grid, basis.index_of(3))
    assert Regularizers.eval_family(family, ExtendedParam.interior(0.5), u) == pytest.approx(0.3)
    assert Regularizers.eval_family(family, ExtendedParam.lower(), u) == pytest.approx(0.1)
    assert Regularizers.eval_family(family, ExtendedParam.upper(), u) == pytest.approx(0.9)


def test_solve_shrinks_each_mode(half_wave):
    grid, basis = half_wave
    family = FamilySpec.spectral_fractional(0.1, M_max=16)
    u = basis.mode(grid, basis.index_of(2))
    res = LowerSolvers.solve_family(family, ExtendedParam.interior(0.5), u)
    assert res.method == 'spectral-closed-form'
    assert np.allclose(res.minimizer.values, u.values / 1.2, atol=1e-12)
    lower = LowerSolvers.solve_family(family, ExtendedParam.lower(), u)
    assert np.allclose(lower.minimizer.values, u.values / 1.1, atol=1e-12)


def test_condition_signs_follow_the_derivative():
    training, basis = fractional_window_data()
    for mu in (0.01, 0.05, 0.2):
        report = SpectralFractional.check_conditions(training, mu, basis)
        assert report.h1_holds == (SpectralFractional.upper_derivative(0.0, mu, training, basis) < 0)
        assert report.h2_holds == (SpectralFractional.upper_derivative(1.0, mu, training, basis) > 0)


def test_learned_order_is_interior_inside_the_window():
    training, basis = fractional_window_data()
    s_hat, boundary = SpectralFractional.learn_s(training, 0.05, basis)
    assert not boundary
    value = SpectralFractional.upper_value(s_hat, 0.05, training, basis)
    assert value < SpectralFractional.upper_value(0.0, 0.05, training, basis)
    assert value < SpectralFractional.upper_value(1.0, 0.05, training, basis)
    assert abs(SpectralFractional.upper_derivative(s_hat, 0.05, training, basis)) < 1e-8
