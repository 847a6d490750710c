import json
import os

from app.cli.config_parser import parse_config
from app.facade import ExperimentFacade
from app.utils.config_exceptions import ConfigError, ConfigIssue
from app.utils.decorators.error_handler import EXIT_ERROR, EXIT_OK


def test_run_writes_outputs(tmp_path):
    config = parse_config("kind = flat_torus\nLx = 1\nLy = 1\ns = 0\n", {'T': '0.5'}, 'trajectory')
    out = tmp_path / 'run'
    status = ExperimentFacade(out_dir=str(out)).run(config)
    assert status == EXIT_OK
    with open(out / 'trajectory.json') as handle:
        assert json.load(handle)['status'] == 'DONE'
    assert os.path.exists(out / 'trajectory.csv')


def test_loading_errors_are_reported_once(tmp_path, capsys):
    def load():
        raise ConfigError([ConfigIssue(4, 's', "cannot parse 'abc'")])

    status = ExperimentFacade(out_dir=str(tmp_path)).run_from(load)
    assert status == EXIT_ERROR
    err = capsys.readouterr().err
    assert err.count("config: line 4: s: cannot parse 'abc'") == 1
    assert os.listdir(tmp_path) == []


def test_unreadable_file_is_reported_with_its_path(tmp_path, capsys):
    missing = str(tmp_path / 'absent.cfg')

    def load():
        with open(missing) as handle:
            return handle.read()

    assert ExperimentFacade(out_dir=str(tmp_path / 'out')).run_from(load) == EXIT_ERROR
    err = capsys.readouterr().err
    assert err.count('error:') == 1
    assert 'absent.cfg' in err
