"""
Lab subcommands.

Every config key has a flag of the same name (underscores become dashes);
flag values override the file given with ``--config``.
"""

import logging
from typing import Optional

import click
from flask import current_app
from flask.cli import AppGroup

from app.cli.config_parser import SCHEMA, parse_config
from app.facade.experiment_facade import ExperimentFacade

logger = logging.getLogger(__name__)

lab_cli = AppGroup('maglab', help="Magnetic geodesic flow lab: trajectories, determinants, counts and entropy.")


def config_options(f):
    """Attach --config and one string option per config key."""
    for key in reversed(list(SCHEMA)):
        f = click.option(f"--{key.replace('_', '-')}", key, default=None, metavar='VALUE',
                         help=SCHEMA[key].help)(f)
    return click.option('--config', 'config_path', default=None, metavar='PATH',
                        help="Key-value configuration file.")(f)


def _read(path: Optional[str]) -> str:
    if path is None:
        return ''
    with open(path, encoding='utf-8') as handle:
        return handle.read()


def execute(command: str, config_path: Optional[str], options) -> int:
    """Parse the configuration for ``command`` and run it."""
    facade = ExperimentFacade(out_dir=current_app.config.get('OUTPUT_DIR', 'results'),
                              workers=current_app.config.get('WORKERS'))
    return facade.run_from(lambda: parse_config(_read(config_path), options, command))


def _exit(command: str, config_path: Optional[str], options) -> None:
    click.get_current_context().exit(execute(command, config_path, options))


@lab_cli.command('trajectory')
@config_options
def trajectory(config_path, **options):
    """Integrate one trajectory; CSV t,u,v,du,dv,energy."""
    _exit('trajectory', config_path, options)


@lab_cli.command('det-growth')
@config_options
def det_growth(config_path, **options):
    """Determinant along one trajectory and its growth rate; CSV t,det."""
    _exit('det-growth', config_path, options)


@lab_cli.command('count')
@config_options
def count(config_path, **options):
    """Count connecting trajectories from x to y up to time T; CSV of roots."""
    _exit('count', config_path, options)


@lab_cli.command('lemma-check')
@config_options
def lemma_check(config_path, **options):
    """Compare the averaged count with the determinant integral at every T."""
    _exit('lemma-check', config_path, options)


@lab_cli.command('entropy-rate')
@config_options
def entropy_rate(config_path, **options):
    """Growth rate of the determinant series against a reference entropy."""
    _exit('entropy-rate', config_path, options)


@lab_cli.command('fiber-check')
@config_options
def fiber_check(config_path, **options):
    """The counting identity at a single start point x."""
    _exit('fiber-check', config_path, options)
