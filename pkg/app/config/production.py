import os
from .base import Config


class ProductionConfig(Config):
    """Production configuration: long unattended runs."""

    DEBUG = False

    # Logging
    LOG_LEVEL = os.environ.get('MAGLAB_LOG_LEVEL', 'WARNING')

    @staticmethod
    def init_app(app):
        """Initialize application with production configuration."""
        Config.init_app(app)
