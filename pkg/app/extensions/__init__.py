from .workers import workers, WorkerPool
from .random_streams import substream, THETA_STREAM, PAIR_STREAM, TARGET_STREAM, ANGLE_STREAM

__all__ = ['workers', 'WorkerPool', 'substream',
           'THETA_STREAM', 'PAIR_STREAM', 'TARGET_STREAM', 'ANGLE_STREAM']
