import json
import logging
import math
from typing import Any, Dict, Optional, Sequence

import numpy as np

from app.repositories.base_repository import BaseRepository

logger = logging.getLogger(__name__)

CSV_FORMAT = '%.17g'


class ResultRepository(BaseRepository[Dict[str, Any]]):
    """CSV series and JSON reports under one run directory."""

    def save_series(self, name: str, header: Sequence[str], rows) -> str:
        """Write ``rows`` as CSV with a header line and 17 significant digits."""
        self.ensure_dir()
        path = self.path_for(f"{name}.csv")
        table = np.asarray(rows, dtype=float).reshape(-1, len(header))
        np.savetxt(path, table, fmt=CSV_FORMAT, delimiter=',', header=','.join(header), comments='')
        logger.debug(f"Wrote {table.shape[0]} rows to {path}")
        return path

    def save_report(self, name: str, report: Dict[str, Any]) -> str:
        """Write ``report`` as JSON with sorted keys, so identical runs give identical bytes."""
        self.ensure_dir()
        path = self.path_for(f"{name}.json")
        with open(path, 'w', encoding='utf-8') as handle:
            handle.write(json.dumps(_plain(report), sort_keys=True, indent=2, allow_nan=False))
            handle.write('\n')
        logger.debug(f"Wrote report {path}")
        return path

    def load_report(self, name: str) -> Optional[Dict[str, Any]]:
        path = self.path_for(f"{name}.json")
        if not self.exists(f"{name}.json"):
            return None
        with open(path, encoding='utf-8') as handle:
            return json.load(handle)


def _plain(value):
    """Convert numpy scalars and arrays nested in ``value`` to JSON types; NaN and inf become null."""
    if isinstance(value, dict):
        return {str(key): _plain(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(item) for item in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return float(value) if math.isfinite(value) else None
    return value
