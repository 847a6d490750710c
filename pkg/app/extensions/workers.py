"""
Worker pool extension.

Spreads independent chunks of work (Monte Carlo batches, pair batches) over
threads. Results always come back in submission order so totals do not depend
on the number of workers.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar

T = TypeVar("T")
R = TypeVar("R")

logger = logging.getLogger(__name__)


class WorkerPool:
    """Ordered map over a thread pool whose size comes from app config (``WORKERS``)."""

    def __init__(self, app=None):
        self.workers = 1
        if app is not None:
            self.init_app(app)

    def init_app(self, app) -> None:
        self.workers = max(1, int(app.config.get('WORKERS', 1) or 1))
        app.extensions['maglab_workers'] = self

    def map(self, fn: Callable[[T], R], items: Iterable[T], workers: Optional[int] = None) -> List[R]:
        """Apply ``fn`` to every item and return results in input order."""
        items = list(items)
        count = self.workers if workers is None else max(1, int(workers))
        if count == 1 or len(items) <= 1:
            return [fn(item) for item in items]
        logger.debug(f"Dispatching {len(items)} chunks over {count} workers")
        with ThreadPoolExecutor(max_workers=count) as executor:
            return list(executor.map(fn, items))


workers = WorkerPool()
