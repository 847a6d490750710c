from .base import Config


class TestingConfig(Config):
    """Testing configuration."""

    TESTING = True
    DEBUG = False
    WORKERS = 1
    LOG_LEVEL = 'WARNING'
    LOG_FILE = None
