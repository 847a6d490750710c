"""
Repository module exports.

This module exports the repository classes and interfaces
used to persist experiment outputs.
"""

from .base_repository import IRepository, BaseRepository
from .result_repository import ResultRepository

__all__ = [
    'IRepository',
    'BaseRepository',
    'ResultRepository'
]
