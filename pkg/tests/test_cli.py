import json
import os

import pytest

FLAT = """\
kind = flat_torus
Lx = 1
Ly = 1
s = 0
"""

HALF_PLANE = """\
kind = hyperbolic_plane
s = 0
"""


def invoke(runner, *args):
    return runner.invoke(args=['maglab', *args])


def read_json(path):
    with open(path) as handle:
        return json.load(handle)


def test_trajectory_writes_series_and_log(runner, config_file, tmp_path):
    out = str(tmp_path / 'traj')
    result = invoke(runner, 'trajectory', '--config', config_file(FLAT), '--T', '1', '--x', '0.1, 0.2',
                    '--angle', '0.5', '--out', out)
    assert result.exit_code == 0, result.output
    with open(os.path.join(out, 'trajectory.csv')) as handle:
        lines = handle.read().splitlines()
    assert lines[0] == 't,u,v,du,dv,energy'
    assert len(lines) == 1002
    report = read_json(os.path.join(out, 'trajectory.json'))
    assert report['status'] == 'DONE'
    assert report['energy_drift'] < 1e-12
    assert os.path.exists(os.path.join(out, 'run.log'))


def test_det_growth_summary(runner, config_file, tmp_path):
    out = str(tmp_path / 'det')
    result = invoke(runner, 'det-growth', '--config', config_file(HALF_PLANE), '--T', '20', '--out', out)
    assert result.exit_code == 0, result.output
    summary = read_json(os.path.join(out, 'det_growth.json'))
    assert {'rate', 'ci_low', 'ci_high', 'n_excluded'} <= set(summary)
    assert summary['ci_low'] <= summary['rate'] <= summary['ci_high']
    assert abs(summary['rate'] - 1.0) <= 0.05


def test_count_lattice(runner, config_file, tmp_path):
    out = str(tmp_path / 'count')
    result = invoke(runner, 'count', '--config', config_file(FLAT), '--x', '0, 0', '--y', '0.5, 0',
                    '--T', '1.6', '--out', out)
    assert result.exit_code == 0, result.output
    assert '8' in result.output.split()
    with open(os.path.join(out, 'roots.csv')) as handle:
        assert len(handle.read().splitlines()) == 9
    assert read_json(os.path.join(out, 'count.json'))['count'] == 8


def test_count_coincident_points_is_an_error(runner, config_file, tmp_path):
    text = FLAT.replace('s = 0', 's = 1')
    result = invoke(runner, 'count', '--config', config_file(text), '--x', '0.3, 0.3', '--y', '0.3, 0.3',
                    '--T', '7', '--out', str(tmp_path / 'same'))
    assert result.exit_code == 2
    assert 'continuum' in result.output


def test_lemma_check_short_horizons(runner, config_file, tmp_path):
    out = str(tmp_path / 'lemma')
    result = invoke(runner, 'lemma-check', '--config', config_file(FLAT), '--T-list', '0.3, 0.45',
                    '--n-theta', '8', '--n-pairs', '150', '--n-angle', '180', '--seed', '5', '--out', out)
    assert result.exit_code == 0, result.output
    report = read_json(os.path.join(out, 'lemma_check.json'))
    assert report['pass'] is True
    assert [row['T'] for row in report['rows']] == [0.3, 0.45]
    assert os.path.exists(os.path.join(out, 'lemma.csv'))


def test_entropy_rate_passes_on_half_plane(runner, config_file, tmp_path):
    out = str(tmp_path / 'entropy')
    result = invoke(runner, 'entropy-rate', '--config', config_file(HALF_PLANE), '--reference', '1.0',
                    '--n-theta', '2', '--out', out)
    assert result.exit_code == 0, result.output
    report = read_json(os.path.join(out, 'entropy_rate.json'))
    assert report['pass'] is True
    assert report['reference'] == 1.0


def test_entropy_rate_fails_on_a_wrong_reference(runner, config_file, tmp_path):
    result = invoke(runner, 'entropy-rate', '--config', config_file(HALF_PLANE), '--reference', '0.5',
                    '--T-max', '12', '--h', '0.01', '--n-theta', '2', '--out', str(tmp_path / 'wrong'))
    assert result.exit_code == 1


def test_reports_do_not_depend_on_workers(runner, config_file, tmp_path):
    text = ("kind = conformal_torus\nLx = 1\nLy = 1\ns = 0.7\n"
            "lambda = 0.1*sin(2*pi*u)*cos(2*pi*v)\nb = 1+0.5*sin(2*pi*v)\n"
            "T_max = 4\nh = 0.01\nn_theta = 300\nseed = 42\n")
    path = config_file(text)
    outputs = []
    for n in ('1', '3'):
        out = str(tmp_path / f'w{n}')
        result = invoke(runner, 'entropy-rate', '--config', path, '--workers', n, '--out', out)
        assert result.exit_code == 0, result.output
        with open(os.path.join(out, 'entropy_rate.json'), 'rb') as handle:
            outputs.append(handle.read())
    assert outputs[0] == outputs[1]


def test_config_errors_exit_2_with_line(runner, config_file, tmp_path):
    result = invoke(runner, 'trajectory', '--config', config_file(FLAT.replace('s = 0', 's = abc')),
                    '--T', '1', '--out', str(tmp_path / 'bad'))
    assert result.exit_code == 2
    assert 'line 4: s:' in result.output


def test_missing_config_file(runner, tmp_path):
    result = invoke(runner, 'trajectory', '--config', str(tmp_path / 'nope.cfg'), '--out', str(tmp_path / 'x'))
    assert result.exit_code == 2
    assert 'nope.cfg' in result.output
    assert result.output.count('error:') == 1


def test_help_lists_every_flag(runner):
    result = invoke(runner, 'count', '--help')
    assert result.exit_code == 0
    for flag in ('--config', '--seed', '--out', '--T-list', '--n-angle', '--allow-coincident', '--lambda'):
        assert flag in result.output


@pytest.mark.slow
def test_lemma_check_acceptance(runner, config_file, tmp_path):
    out = str(tmp_path / 'acceptance')
    result = invoke(runner, 'lemma-check', '--config', config_file(FLAT), '--T-list', '2, 5, 10',
                    '--n-theta', '64', '--n-pairs', '100', '--out', out)
    assert result.exit_code == 0, result.output
    assert read_json(os.path.join(out, 'lemma_check.json'))['status'] == 'PASS'
