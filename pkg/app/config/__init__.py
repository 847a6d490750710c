from .base import Config
from .development import DevelopmentConfig
from .production import ProductionConfig
from .testing import TestingConfig

__all__ = ['Config', 'DevelopmentConfig', 'ProductionConfig', 'TestingConfig']
