import logging
from functools import wraps

import click

from app.utils.config_exceptions import ConfigError
from app.utils.counting_exceptions import CountingError
from app.utils.estimator_exceptions import EstimatorError
from app.utils.flow_exceptions import IntegrationError
from app.utils.geometry_exceptions import GeometryError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_ERROR = 2


def _report(message: str) -> int:
    click.echo(f"error: {message}", err=True)
    return EXIT_ERROR


def handle_errors(f):
    """Turn lab exceptions into a one-line message on stderr and exit status 2."""
    @wraps(f)
    def decorated_function(*args, **kwargs):
        try:
            return f(*args, **kwargs)
        except ConfigError as e:
            logger.error(str(e))
            for issue in e.issues:
                click.echo(f"config: {issue}", err=True)
            return EXIT_ERROR
        except (GeometryError, IntegrationError) as e:
            logger.error(f"{type(e).__name__}: {e}")
            return _report(str(e))
        except (CountingError, EstimatorError) as e:
            logger.error(f"{type(e).__name__}: {e}")
            return _report(str(e))
        except OSError as e:
            path = e.filename or ''
            logger.error(f"I/O failure on {path}: {e.strerror or e}")
            return _report(f"cannot access {path}: {e.strerror or e}")
        except Exception as e:
            logger.exception("Unexpected failure")
            return _report(str(e))
    return decorated_function
