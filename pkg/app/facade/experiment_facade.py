"""
Experiment orchestration.

``ExperimentFacade.run`` takes a validated ``RunConfig``, builds the surface,
runs one subcommand, writes its CSV series and JSON report through the
``ResultRepository`` and returns the process exit status.
"""

import logging
import os
from contextlib import contextmanager
from typing import Callable, Dict, Optional

import click
import numpy as np

from app.models.estimate import Report
from app.models.run_config import RunConfig
from app.models.surface import SurfaceKind, SurfaceModel
from app.repositories.result_repository import ResultRepository
from app.services import estimators, geometry
from app.services.connection_counter import count_connections
from app.services.magnetic_flow import flow
from app.services.variational import FIT_FLOOR, alpha_determinant_along, growth_from_trace
from app.utils.counting_exceptions import ContinuumDegeneracyError
from app.utils.decorators.error_handler import EXIT_ERROR, EXIT_FAIL, EXIT_OK, handle_errors
from app.utils.flow_exceptions import IntegrationError

logger = logging.getLogger(__name__)

LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s: %(message)s'
EXIT_BY_STATUS = {'PASS': EXIT_OK, 'DONE': EXIT_OK, 'FAIL': EXIT_FAIL, 'INCOMPLETE': EXIT_ERROR}

HYPERBOLIC_ORIGIN = (0.0, 1.0)
TORUS_ORIGIN = (0.0, 0.0)
HYPERBOLIC_T_MAX = 20.0
TORUS_T_MAX = 80.0


@contextmanager
def run_log(out_dir: str):
    """Send every log record of a run to ``<out_dir>/run.log`` with timestamps."""
    os.makedirs(out_dir, exist_ok=True)
    handler = logging.FileHandler(os.path.join(out_dir, 'run.log'), mode='w', encoding='utf-8')
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    handler.setLevel(logging.INFO)
    root = logging.getLogger()
    previous = root.level
    root.addHandler(handler)
    if root.level > logging.INFO or root.level == logging.NOTSET:
        root.setLevel(logging.INFO)
    try:
        yield handler
    finally:
        root.removeHandler(handler)
        root.setLevel(previous)
        handler.close()


class ExperimentFacade:
    """Facade for running lab experiments"""

    def __init__(self, out_dir: str = 'results', workers: Optional[int] = None):
        self.out_dir = out_dir
        self.workers = workers
        self.handlers: Dict[str, Callable[[RunConfig, SurfaceModel, ResultRepository], int]] = {
            'trajectory': self.trajectory,
            'det-growth': self.det_growth,
            'count': self.count,
            'lemma-check': self.lemma_check,
            'entropy-rate': self.entropy_rate,
            'fiber-check': self.fiber_check,
        }

    def run(self, config: RunConfig) -> int:
        """Run ``config.command``; 0 on success or PASS, 1 on FAIL, 2 on INCOMPLETE or error."""
        return self.run_from(lambda: config)

    @handle_errors
    def run_from(self, load: Callable[[], RunConfig]) -> int:
        """Load a configuration with ``load`` and run it; loading errors exit like run errors."""
        config = load()
        handler = self.handlers.get(config.command)
        if handler is None:
            raise ValueError(f"Unknown subcommand {config.command!r}")
        out_dir = config.out or self.out_dir
        repository = ResultRepository(out_dir)
        with run_log(out_dir):
            logger.info(f"{config.command}: seed={config.seed} out={out_dir}")
            surface = self._surface(config)
            status = handler(config, surface, repository)
            logger.info(f"{config.command} finished with exit status {status}")
        return status

    def _surface(self, config: RunConfig) -> SurfaceModel:
        return geometry.make_surface(config.kind, config.Lx, config.Ly, config.lambda_expr,
                                     config.b_expr, config.s)

    def _workers(self, config: RunConfig) -> Optional[int]:
        return config.workers if config.workers is not None else self.workers

    def _origin(self, config: RunConfig, surface: SurfaceModel):
        if config.x is not None:
            return np.array(config.x, dtype=float)
        return np.array(HYPERBOLIC_ORIGIN if surface.kind is SurfaceKind.HYPERBOLIC_PLANE else TORUS_ORIGIN)

    def _finish(self, report: Report, repository: ResultRepository, name: str) -> int:
        repository.save_report(name, report.to_dict())
        click.echo(f"{name}: {report.status}")
        return EXIT_BY_STATUS.get(report.status, EXIT_ERROR)

    def trajectory(self, config: RunConfig, surface: SurfaceModel, repository: ResultRepository) -> int:
        state = geometry.launch_states(surface, self._origin(config, surface), config.angle)
        try:
            sample = flow(surface, state, config.T, config.h, config.renormalize)
        except IntegrationError as e:
            if e.partial is not None:
                self._save_trajectory(repository, e.partial)
            raise
        self._save_trajectory(repository, sample)
        report = Report(status='DONE', payload={
            'system': surface.to_dict(),
            'T': config.T,
            'h': config.h,
            'initial': sample.state(0).to_dict(),
            'final': sample.final.to_dict(),
            'energy_drift': sample.energy_drift,
            'samples': int(len(sample.times)),
        })
        return self._finish(report, repository, 'trajectory')

    def _save_trajectory(self, repository: ResultRepository, sample) -> None:
        rows = np.column_stack([sample.times, sample.states, sample.energy])
        repository.save_series('trajectory', ('t', 'u', 'v', 'du', 'dv', 'energy'), rows)

    def det_growth(self, config: RunConfig, surface: SurfaceModel, repository: ResultRepository) -> int:
        state = geometry.launch_states(surface, self._origin(config, surface), config.angle)
        trace = alpha_determinant_along(surface, state, config.T, config.h, config.renormalize)
        repository.save_series('det', ('t', 'det'), np.column_stack([trace.times, trace.det_values]))
        estimate = growth_from_trace(trace, config.window_fraction, FIT_FLOOR, estimators.growth_rate)
        payload = {'system': surface.to_dict(), 'T': config.T, 'h': config.h}
        payload.update(estimate.to_dict())
        return self._finish(Report(status='DONE', payload=payload), repository, 'det_growth')

    def count(self, config: RunConfig, surface: SurfaceModel, repository: ResultRepository) -> int:
        result = count_connections(surface, config.x, config.y, config.T, config.count_options())
        rows = [[r.launch_angle, r.arrival_time, r.residual, r.jacobian_det] for r in result.roots]
        repository.save_series('roots', ('angle', 't', 'residual', 'jacobian_det'), rows)
        payload = {
            'system': surface.to_dict(),
            'x': list(config.x),
            'y': list(config.y),
            'T': config.T,
            'count': result.count,
            'flags': result.flags.to_dict(),
            'options': config.count_options().resolved(config.T).to_dict(),
        }
        click.echo(str(result.count))
        if result.flags.continuum_degenerate:
            repository.save_report('count', Report(status='INCOMPLETE', payload=payload).to_dict())
            raise ContinuumDegeneracyError(
                "Continuum degeneracy: a whole arc of launch angles arrives at y at one time; "
                "the count is not finite")
        return self._finish(Report(status='DONE', payload=payload), repository, 'count')

    def lemma_check(self, config: RunConfig, surface: SurfaceModel, repository: ResultRepository) -> int:
        T_list = config.T_list or [config.T]
        report = estimators.lemma_check(surface, T_list, config.n_theta, config.n_pairs, config.count_options(),
                                        config.h, config.seed, self._workers(config))
        rows = [[row['T'], row['lhs'], row['lhs_se'], row['rhs'], row['rhs_se']]
                for row in report.payload.get('rows', [])]
        repository.save_series('lemma', ('T', 'lhs', 'lhs_se', 'rhs', 'rhs_se'), rows)
        if report.status == 'INCOMPLETE':
            click.echo(f"incomplete: {report.payload.get('cause')}", err=True)
        return self._finish(report, repository, 'lemma_check')

    def entropy_rate(self, config: RunConfig, surface: SurfaceModel, repository: ResultRepository) -> int:
        T_max = config.T_max
        if T_max is None:
            T_max = HYPERBOLIC_T_MAX if surface.kind is SurfaceKind.HYPERBOLIC_PLANE else TORUS_T_MAX
        report = estimators.entropy_report(surface, T_max, config.n_theta, config.h, config.seed,
                                           config.reference, config.window_fraction, self._workers(config))
        repository.save_series('growth', ('T', 'value'), report.series)
        return self._finish(report, repository, 'entropy_rate')

    def fiber_check(self, config: RunConfig, surface: SurfaceModel, repository: ResultRepository) -> int:
        report = estimators.fiber_check(surface, config.x, config.T, config.n_angle, config.n_targets,
                                        config.count_options(), config.h, config.seed, self._workers(config))
        if report.status == 'INCOMPLETE':
            click.echo(f"incomplete: {report.payload.get('cause')}", err=True)
        return self._finish(report, repository, 'fiber_check')
