"""
Counter-based random substreams.

Every Monte Carlo sample draws from its own Philox stream keyed by
(seed, stream tag, sample index), so a sample's randomness does not depend on
which worker computes it or on how samples are chunked.
"""

import numpy as np

THETA_STREAM = 0
PAIR_STREAM = 1
TARGET_STREAM = 2
ANGLE_STREAM = 3


def substream(seed: int, index: int, tag: int = THETA_STREAM, attempt: int = 0) -> np.random.Generator:
    """Generator for sample ``index`` of stream ``tag`` under ``seed``; ``attempt`` keys redraws."""
    sequence = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(tag), int(index), int(attempt)))
    return np.random.Generator(np.random.Philox(sequence))
