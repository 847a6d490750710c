"""
Base repository classes for experiment outputs.

Implements the Repository pattern over an output directory: every run writes
its series and reports through a repository so the facade never touches paths.
"""

import logging
import os
from abc import ABC, abstractmethod
from typing import Any, Dict, Generic, List, Optional, Sequence, TypeVar

T = TypeVar("T")

logger = logging.getLogger(__name__)


class IRepository(Generic[T], ABC):
    """
    Abstract interface for result persistence.

    This interface defines the contract that all result repositories must implement.
    """

    @abstractmethod
    def save_series(self, name: str, header: Sequence[str], rows) -> str:
        """Persist a numeric table and return its path."""
        pass

    @abstractmethod
    def save_report(self, name: str, report: Dict[str, Any]) -> str:
        """Persist a report document and return its path."""
        pass

    @abstractmethod
    def load_report(self, name: str) -> Optional[T]:
        """Read a stored report back."""
        pass

    @abstractmethod
    def exists(self, name: str) -> bool:
        """Check if an output exists."""
        pass

    @abstractmethod
    def list_outputs(self) -> List[str]:
        """Names of every stored output."""
        pass


class BaseRepository(IRepository[T]):
    """
    Base repository rooted at an output directory.

    Subclasses define how tables and documents are encoded.

    Example:
        >>> repository = ResultRepository('results/run-1')
        >>> repository.save_report('count', {'count': 3})
    """

    def __init__(self, out_dir: str):
        self.out_dir = out_dir

    def path_for(self, name: str) -> str:
        return os.path.join(self.out_dir, name)

    def ensure_dir(self) -> None:
        os.makedirs(self.out_dir, exist_ok=True)

    def exists(self, name: str) -> bool:
        return os.path.exists(self.path_for(name))

    def list_outputs(self) -> List[str]:
        if not os.path.isdir(self.out_dir):
            return []
        return sorted(os.listdir(self.out_dir))
