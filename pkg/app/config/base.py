import logging
import os
from dotenv import load_dotenv

load_dotenv()

LOG_FORMAT = '%(levelname)s %(name)s: %(message)s'
FILE_LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s: %(message)s'


class Config:
    """Base configuration class with common settings."""

    # Worker threads for Monte Carlo batches
    WORKERS = int(os.environ.get('MAGLAB_WORKERS', '1'))

    # Default directory for CSV series, JSON reports and run.log
    OUTPUT_DIR = os.environ.get('MAGLAB_OUTPUT_DIR', 'results')

    # Logging
    LOG_LEVEL = os.environ.get('MAGLAB_LOG_LEVEL', 'INFO')
    LOG_FILE = os.environ.get('MAGLAB_LOG_FILE')

    @staticmethod
    def init_app(app):
        """Initialize application with this configuration."""
        configure_logging(app.config.get('LOG_LEVEL', 'INFO'), app.config.get('LOG_FILE'))


def configure_logging(level: str, log_file: str = None) -> None:
    """Root logger at ``level`` on stderr, plus a timestamped file when ``log_file`` is set."""
    root = logging.getLogger()
    root.setLevel(level)
    if not any(getattr(h, '_maglab', False) for h in root.handlers):
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        handler.setLevel(level)
        handler._maglab = True
        root.addHandler(handler)
    if log_file and not any(getattr(h, 'baseFilename', None) == os.path.abspath(log_file) for h in root.handlers):
        file_handler = logging.FileHandler(log_file, encoding='utf-8')
        file_handler.setFormatter(logging.Formatter(FILE_LOG_FORMAT))
        root.addHandler(file_handler)
