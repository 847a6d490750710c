from .commands import lab_cli
from .config_parser import parse_config

__all__ = ['lab_cli', 'parse_config']
