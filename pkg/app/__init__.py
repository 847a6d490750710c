import os
from flask import Flask
from .config import DevelopmentConfig, ProductionConfig, TestingConfig
from app.extensions import workers

CONFIGS = {
    'development': DevelopmentConfig,
    'production': ProductionConfig,
    'testing': TestingConfig,
}


def create_app(config_class=None):
    """Application factory pattern."""
    app = Flask(__name__)

    # Auto-detect configuration based on environment
    if config_class is None:
        config_class = CONFIGS.get(os.environ.get('MAGLAB_ENV', 'development'), DevelopmentConfig)

    # Load configuration
    app.config.from_object(config_class)
    config_class.init_app(app)

    # Initialize extensions
    workers.init_app(app)

    # Register commands
    from .cli import lab_cli
    app.cli.add_command(lab_cli)

    return app
