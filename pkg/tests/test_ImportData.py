import json
import math

import numpy as np
import pytest

from bilevellearn import ImportData
from bilevellearn.Errors import ConfigError, SignalFormatError
from bilevellearn.GridCore import Domain, Grid, GridSignal
from bilevellearn.ImportData import RunConfig


def test_read_csv_row(tmp_path):
    path = tmp_path / 'u.csv'
    path.write_text('0,1,2,3\n')
    u = ImportData.read_signal(str(path))
    assert np.array_equal(u.values, [0.0, 1.0, 2.0, 3.0])
    assert u.grid.domain.bounds == ((0.0, 1.0),)


def test_read_csv_on_the_fractional_domain(tmp_path):
    path = tmp_path / 'u.csv'
    path.write_text('0.5\n0.25\n\n0.125\n')
    u = ImportData.read_signal(str(path), fractional=True)
    assert u.grid.domain.bounds[0][1] == pytest.approx(math.pi)
    assert u.grid.size == 3


def test_read_plain_pgm(tmp_path):
    path = tmp_path / 'img.pgm'
    path.write_text('P2\n# two by two\n2 2\n255\n0 255\n128 64\n')
    u = ImportData.read_signal(str(path))
    assert u.grid.dim == 2
    assert np.allclose(u.values, np.array([0, 255, 128, 64]) / 255.0)


def test_csv_roundtrip(tmp_path, rng):
    grid = Grid(Domain.rect(0.0, 1.0, 0.0, 1.0), (4, 5))
    u = GridSignal(grid, rng.normal(size=grid.size))
    path = str(tmp_path / 'u.csv')
    ImportData.write_signal(u, path)
    back = ImportData.read_signal(path, grid)
    assert np.allclose(back.values, u.values, rtol=1e-6, atol=1e-9)


def test_binary_pgm_roundtrip(tmp_path):
    grid = Grid(Domain.rect(0.0, 1.0, 0.0, 1.0), (3, 4))
    u = GridSignal(grid, np.linspace(0.0, 1.0, grid.size))
    path = str(tmp_path / 'u.pgm')
    ImportData.write_signal(u, path, binary=True)
    back = ImportData.read_signal(path, grid)
    assert np.max(np.abs(back.values - u.values)) <= 0.5 / 255 + 1e-12


def test_signal_errors(tmp_path):
    path = tmp_path / 'u.csv'
    path.write_text('1,2,3\n')
    with pytest.raises(SignalFormatError):
        ImportData.read_signal(str(path), Grid(Domain.interval(0.0, 1.0), 4))
    bad = tmp_path / 'bad.csv'
    bad.write_text('1,x\n')
    with pytest.raises(SignalFormatError):
        ImportData.read_signal(str(bad))
    with pytest.raises(SignalFormatError):
        ImportData.read_signal(str(tmp_path / 'u.txt'))
    with pytest.raises(SignalFormatError):
        ImportData.write_signal(GridSignal.constant(Grid(Domain.interval(0.0, 1.0), 4), 0.5),
                                str(tmp_path / 'u.pgm'))


def test_run_config_errors(tmp_path):
    with pytest.raises(ConfigError):
        RunConfig.from_dict({'family': 'weight', 'colour': 'blue'})
    with pytest.raises(ConfigError):
        RunConfig(family='sobolev')
    with pytest.raises(ConfigError):
        RunConfig(data_clean=['a.csv'])
    path = tmp_path / 'run.json'
    path.write_text('{"family": "weight", ')
    with pytest.raises(ConfigError):
        ImportData.read_run_config(str(path))
    with pytest.raises(ConfigError):
        ImportData.read_run_config(str(tmp_path / 'missing.json'))


def test_read_run_config(tmp_path):
    path = tmp_path / 'run.json'
    path.write_text(json.dumps({'family': 'ak', 'grid': {'domain': [0, 1], 'points': 32},
                                'param_grid': {'count': 5}, 'seed': 3}))
    cfg = ImportData.read_run_config(str(path))
    assert cfg.family == 'aubert-kornprobst'
    grid = cfg.build_grid()
    assert grid.size == 32
    pg = cfg.build_param_grid()
    assert (pg.transform, pg.count) == ('log', 5)
    assert cfg.solver_config().seed == 3
    assert cfg.with_overrides(seed=None, threads=2).threads == 2


@pytest.mark.parametrize('name,params,variant', [
    ('weight', {'base': 'quadratic'}, 'Weight'),
    ('exponent', {'f': 'abs-diff'}, 'Exponent'),
    ('brezis-nguyen', {'K_phi': 0.5}, 'BrezisNguyen'),
    ('aubert-kornprobst', {}, 'AubertKornprobst'),
    ('fractional', {'mu': 0.05, 'M_max': 16}, 'SpectralFractional'),
])
def test_build_family(name, params, variant):
    family = RunConfig(family=name, family_params=params).build_family()
    assert family.variant == variant


def test_build_family_errors():
    with pytest.raises(ConfigError):
        RunConfig(family='fractional').build_family()
    with pytest.raises(ConfigError):
        RunConfig(family='weight', family_params={'base': 'tv', 'extra': 1}).build_family()
    with pytest.raises(ConfigError):
        RunConfig(family='weight', family_params={'base': 'sobolev'}).build_family()
    with pytest.raises(ConfigError):
        RunConfig(grid={'domain': [0, 1]}).build_grid()


def test_load_training_infers_the_grid(tmp_path):
    clean, noisy = tmp_path / 'c.csv', tmp_path / 'n.csv'
    clean.write_text('0\n0.5\n1\n')
    noisy.write_text('0.1\n0.4\n1.1\n')
    training = RunConfig(data_clean=[str(clean)], data_noisy=[str(noisy)]).load_training()
    assert training.N == 1
    assert training.grid.size == 3
    assert np.allclose(training.noisy[0].values, [0.1, 0.4, 1.1])
