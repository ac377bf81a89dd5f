import json

import pytest

from bilevellearn import cli
from bilevellearn.Demos import affine_data, fractional_window_data
from bilevellearn.Errors import ParameterError
from bilevellearn.ImportData import write_signal


def _write_training(tmp_path, training):
    clean, noisy = training.pairs[0]
    paths = [str(tmp_path / 'clean.csv'), str(tmp_path / 'noisy.csv')]
    write_signal(clean, paths[0])
    write_signal(noisy, paths[1])
    return paths


def test_parse_param():
    assert cli.parse_param('lower').is_lower
    assert cli.parse_param('INF').is_upper
    assert cli.parse_param('0.25').t == 0.25
    with pytest.raises(ParameterError):
        cli.parse_param('half')


def test_learn_writes_every_output(tmp_path, sine_training):
    clean, noisy = _write_training(tmp_path, sine_training)
    out = tmp_path / 'out'
    code = cli.main(['learn', '--data-clean', clean, '--data-noisy', noisy, '--param-grid', '0.001:1:6:log',
                     '--out', str(out), '--html'])
    assert code == cli.EXIT_OK
    for name in ('report.json', 'samples.csv', 'summary.txt', 'report.html', 'manifest.json'):
        assert (out / name).exists()
    report = json.loads((out / 'report.json').read_text())
    assert report['family']['variant'] == 'Weight'
    manifest = json.loads((out / 'manifest.json').read_text())
    assert sorted(manifest['outputs']) == ['report.html', 'report.json', 'samples.csv', 'summary.txt']


def test_learn_is_deterministic(tmp_path, sine_training):
    clean, noisy = _write_training(tmp_path, sine_training)
    bodies = []
    for name in ('a', 'b'):
        out = tmp_path / name
        assert cli.main(['learn', '--data-clean', clean, '--data-noisy', noisy, '--param-grid', '0.001:1:6:log',
                         '--refine-iters', '8', '--out', str(out)]) == 0
        bodies.append((out / 'report.json').read_bytes())
    assert bodies[0] == bodies[1]


def test_conditions_command(tmp_path, sine_training):
    clean, noisy = _write_training(tmp_path, sine_training)
    out = tmp_path / 'out'
    assert cli.main(['conditions', '--data-clean', clean, '--data-noisy', noisy, '--out', str(out)]) == 0
    conds = json.loads((out / 'conditions.json').read_text())['conditions']
    assert {'H1', 'H2', 'H3', 'H4'} <= set(conds)


def test_invalid_input_exit_code(tmp_path, sine_training):
    clean, noisy = _write_training(tmp_path, sine_training)
    assert cli.main(['learn', '--family', 'sobolev', '--data-clean', clean, '--data-noisy', noisy,
                     '--out', str(tmp_path / 'out')]) == cli.EXIT_INVALID
    assert cli.main(['eval', '--data-clean', clean, '--data-noisy', noisy, '--param', '-1',
                     '--out', str(tmp_path / 'out')]) == cli.EXIT_INVALID
    assert cli.main(['mosco', '--family', 'bn', '--scan', 'scaled-bn', '--target', 'upper',
                     '--sequence', '0.1,0.2,0.4,0.8', '--out', str(tmp_path / 'out')]) == cli.EXIT_INVALID


def test_eval_lipschitz_edge_on_affine_data(tmp_path):
    clean, noisy = _write_training(tmp_path, affine_data(0.01, points=128))
    config = tmp_path / 'run.json'
    config.write_text(json.dumps({'family': 'exponent', 'family_params': {'f': 'diff-quotient', 'b': 0.01},
                                  'data_clean': [clean], 'data_noisy': [noisy], 'out': str(tmp_path / 'out')}))
    assert cli.main(['eval', '--config', str(config), '--param', 'upper']) == 0
    result = json.loads((tmp_path / 'out' / 'eval.json').read_text())
    assert result['I_bar'] <= 1e-6


def test_fractional_learn_is_interior(tmp_path):
    clean, noisy = _write_training(tmp_path, fractional_window_data()[0])
    out = tmp_path / 'out'
    assert cli.main(['learn', '--family', 'fractional', '--mu', '0.05', '--data-clean', clean,
                     '--data-noisy', noisy, '--out', str(out)]) == 0
    report = json.loads((out / 'report.json').read_text())
    assert report['interior'] is True
    assert report['conditions']['H1_s']['holds'] and report['conditions']['H2_s']['holds']


def test_solve_and_mosco_commands(tmp_path, sine_training):
    clean, noisy = _write_training(tmp_path, sine_training)
    out = tmp_path / 'solve'
    assert cli.main(['solve', '--data-clean', clean, '--data-noisy', noisy, '--param', '0.01',
                     '--out', str(out)]) == 0
    assert (out / 'minimizer_0.csv').exists() and (out / 'solve.json').exists()
    out = tmp_path / 'mosco'
    assert cli.main(['mosco', '--family', 'ak', '--target', 'lower', '--sequence', '0.4,0.3,0.2,0.15,0.1',
                     '--html', '--out', str(out)]) == 0
    assert (out / 'scan.html').exists()
    scan = json.loads((out / 'scan.json').read_text())
    assert len(scan['values']) == 5


def test_demo_command(tmp_path):
    assert cli.main(['demo', 'quadratic-weight', '--out', str(tmp_path)]) == 0
    assert json.loads((tmp_path / 'demo.json').read_text())[0]['passed'] is True


def test_conditions_report_phi_hypotheses(tmp_path, sine_training):
    clean, noisy = _write_training(tmp_path, sine_training)
    out = tmp_path / 'out'
    assert cli.main(['conditions', '--family', 'bn', '--data-clean', clean, '--data-noisy', noisy,
                     '--out', str(out)]) == 0
    body = json.loads((out / 'conditions.json').read_text())
    assert body['conditions'] == {}
    assert all(body['phi'][name]['holds'] for name in ('H1', 'H2', 'H3', 'H4', 'H5'))


@pytest.mark.parametrize('name', ['remark-2.3', 'example-4.2', 'example-5.3', 'remark-7.4'])
def test_demo_names(tmp_path, name):
    assert cli.main(['demo', name, '--out', str(tmp_path)]) == cli.EXIT_OK
    assert json.loads((tmp_path / 'demo.json').read_text())[0]['passed'] is True


def test_unknown_demo_is_rejected():
    with pytest.raises(SystemExit):
        cli.main(['demo', 'remark-9.9'])
