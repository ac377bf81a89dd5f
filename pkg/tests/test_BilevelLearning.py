import math

import numpy as np
import pytest

from bilevellearn import BilevelLearning
from bilevellearn import GridCore
from bilevellearn import LowerSolvers
from bilevellearn.BilevelLearning import LearnReport, ParamGrid
from bilevellearn.Errors import ParameterError
from bilevellearn.GridCore import TrainingSet
from bilevellearn.Regularizers import (BaseRegularizer, DoubleIntegrand, ExtendedParam, FamilySpec, PhiSpec,
                                       RhoSpec)

TV = FamilySpec.weight(BaseRegularizer('TV'))


def test_param_grid_spacing():
    log = ParamGrid.parse('0.0001:1:16:log')
    values = log.values()
    assert len(values) == 16
    assert values[0] == 1e-4 and values[-1] == 1.0
    ratios = np.array(values[1:]) / np.array(values[:-1])
    assert np.allclose(ratios, ratios[0], rtol=1e-10)
    inv = ParamGrid.parse('2:64:5:inv-linear')
    steps = np.diff(1.0 / np.array(inv.values()))
    assert np.allclose(steps, steps[0], rtol=1e-10)


@pytest.mark.parametrize('text', ['1:2:2:linear', '2:1:5:linear', '0:1:5:log', '0.1:1:5:s-linear',
                                  '0:1:5:cubic', '0:1:5'])
def test_param_grid_rejects(text):
    with pytest.raises(ParameterError):
        ParamGrid.parse(text)


def test_params_include_the_edges():
    grid = ParamGrid('log', 0.01, 1.0, 5)
    params = grid.params(TV)
    assert params[0] == ExtendedParam.lower() and params[-1] == ExtendedParam.upper()
    assert len(params) == 7
    exponent = FamilySpec.exponent(DoubleIntegrand.diff_quotient())
    params = ParamGrid('inv-linear', 1.0, 64.0, 5).params(exponent)
    assert [p.variant for p in params].count('LowerEdge') == 0
    assert len(params) == 6
    assert len(ParamGrid('log', 0.01, 1.0, 5, include_edges=False).params(TV)) == 5


def test_approach_sequences_close_in_on_the_edges():
    grid = ParamGrid('log', 1e-4, 1.0, 8)
    lower = [p.t for p in grid.approach(TV, ExtendedParam.lower())]
    assert lower == pytest.approx([1e-5, 1e-6, 1e-7, 1e-8, 1e-9])
    upper = [p.t for p in grid.approach(TV, ExtendedParam.upper())]
    assert upper == pytest.approx([10.0, 100.0, 1e3, 1e4, 1e5])
    fractional = FamilySpec.spectral_fractional(0.05)
    orders = [p.t for p in ParamGrid('s-linear', 0.02, 0.98, 8).approach(fractional, ExtendedParam.upper())]
    assert orders == pytest.approx([1.0 - 0.02 * 10.0 ** -k for k in range(1, 6)])


def test_lower_edge_reproduces_the_noise(sine_training):
    value, results = BilevelLearning.extended_upper(TV, ExtendedParam.lower(), sine_training)
    clean, noisy = sine_training.pairs[0]
    assert value == pytest.approx(GridCore.l2_distance_sq(noisy, clean), rel=1e-14)
    assert results[0].method == 'edge-identity'


def test_threads_do_not_change_the_value():
    from conftest import noisy_sine_training
    a, b = noisy_sine_training(1), noisy_sine_training(2)
    training = TrainingSet(a.grid, a.pairs + b.pairs)
    param = ExtendedParam.interior(0.01)
    serial, _ = BilevelLearning.extended_upper(TV, param, training)
    threaded, _ = BilevelLearning.extended_upper(TV, param, training, threads=2)
    assert serial == threaded


def test_quadratic_weight_matches_the_closed_form(ramp):
    family = FamilySpec.weight(BaseRegularizer('QuadraticL2'))
    training = TrainingSet.single(ramp, ramp)
    norm = GridCore.l2_norm_sq(ramp)
    for alpha in (0.01, 0.5, 3.0, 40.0):
        value, _ = BilevelLearning.extended_upper(family, ExtendedParam.interior(alpha), training)
        assert value == pytest.approx((alpha / (1.0 + alpha)) ** 2 * norm, abs=1e-10)
    upper, _ = BilevelLearning.extended_upper(family, ExtendedParam.upper(), training)
    assert upper == pytest.approx(norm)
    lower, _ = BilevelLearning.extended_upper(family, ExtendedParam.lower(), training)
    assert lower == 0.0


def test_learn_finds_an_interior_tv_weight(sine_training):
    report = BilevelLearning.learn(TV, sine_training, ParamGrid('log', 1e-4, 1.0, 16), refine_iters=20)
    clean, noisy = sine_training.pairs[0]
    assert report.interior
    assert report.I_min < GridCore.l2_distance_sq(noisy, clean)
    assert report.stats['refined'] > 0
    keys = [s.param.sort_key() for s in report.samples]
    assert keys == sorted(keys)
    for name in ('H1', 'H2', 'H3', 'H4', 'H4_suff'):
        assert report.conditions[name]['holds']
    assert report.verdict() == 'structure preserved'
    assert sorted(report.approach) == ['LowerEdge', 'UpperEdge']
    assert all(len(v) == 5 for v in report.approach.values())
    relaxation = report.relaxation_check()
    assert relaxation['LowerEdge']['holds'] and relaxation['UpperEdge']['holds']
    body = report.to_json()
    for key in ('family', 'grid', 'samples', 'argmin', 'I_min', 'interior', 'conditions', 'relaxation',
                'stats', 'verdict'):
        assert key in body


def test_relaxation_falls_back_to_grid_samples(sine_training):
    report = BilevelLearning.learn(TV, sine_training, ParamGrid('log', 1e-4, 1.0, 8), approach=False)
    assert report.approach == {}
    assert set(report.relaxation_check()) == {'LowerEdge', 'UpperEdge'}


def test_weight_conditions_flag_the_quadratic_base(sine_training):
    conds = BilevelLearning.check_weight_conditions(sine_training, BaseRegularizer('QuadraticL2'))
    assert not conds['H1']['holds']
    assert conds['H4']['holds']


def test_delta_conditions_fail_without_noise(ramp):
    family = FamilySpec.aubert_kornprobst(RhoSpec('BallIndicator', 1))
    training = TrainingSet.single(ramp, ramp)

    def identity(weight, u_eta):
        return LowerSolvers.build_result(u_eta, u_eta, 0.0, 'identity')

    conds = BilevelLearning.check_delta_conditions(training, family, tv_solver=identity)
    assert not conds['H7']['holds']
    assert not conds['H8']['holds']


def test_condition_checks_per_family(sine_training):
    exponent = FamilySpec.exponent(DoubleIntegrand.weighted_abs_diff())
    assert set(BilevelLearning.condition_checks(exponent, sine_training)) == {'H1_p', 'H2_p', 'H4_p', 'H5_p'}
    bn = FamilySpec.brezis_nguyen(PhiSpec('QuadCap'))
    assert BilevelLearning.condition_checks(bn, sine_training) == {}


def _report(argmin, conditions):
    report = LearnReport()
    report.argmin = argmin
    report.interior = argmin.is_interior
    report.conditions = conditions
    return report


def test_structure_report_texts():
    ok = {'value': 1.0, 'holds': True}
    bad = {'value': -1.0, 'holds': False}
    inner = ExtendedParam.interior(0.5)
    assert BilevelLearning.structure_report(_report(inner, {}))[0] == 'unclassified'
    assert BilevelLearning.structure_report(_report(inner, {'H1': ok, 'mu': 0.1}))[0] == 'structure preserved'
    text, info = BilevelLearning.structure_report(_report(ExtendedParam.upper(), {'H7': ok, 'H8': bad}))
    assert text == 'boundary UpperEdge, H8 violated'
    assert info['held'] == ['H7'] and info['failed'] == ['H8']
    text, _ = BilevelLearning.structure_report(_report(ExtendedParam.lower(), {'H3': ok}))
    assert text == 'boundary LowerEdge although H3 hold'
    assert math.isnan(LearnReport().I_min)
