import os
from .base import Config


class DevelopmentConfig(Config):
    """Development configuration."""

    DEBUG = True

    # Logging
    LOG_LEVEL = os.environ.get('MAGLAB_LOG_LEVEL', 'DEBUG')

    @staticmethod
    def init_app(app):
        """Initialize application with development configuration."""
        Config.init_app(app)
