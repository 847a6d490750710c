from .surface import SurfaceKind, ChartPoint, TangentVector, SurfaceModel
from .state import UnitTangentState, TrajectorySample, VariationalState, DeterminantTrace
from .connection import ConnectionRoot, CountOptions, CountFlags, CountResult
from .estimate import IntegralEstimate, GrowthEstimate, LemmaRow, Report
from .run_config import RunConfig

__all__ = [
    'SurfaceKind', 'ChartPoint', 'TangentVector', 'SurfaceModel',
    'UnitTangentState', 'TrajectorySample', 'VariationalState', 'DeterminantTrace',
    'ConnectionRoot', 'CountOptions', 'CountFlags', 'CountResult',
    'IntegralEstimate', 'GrowthEstimate', 'LemmaRow', 'Report',
    'RunConfig',
]
