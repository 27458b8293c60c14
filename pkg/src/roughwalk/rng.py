"""Counter-based random streams.

Every random draw in the package comes from a Philox counter-based generator
keyed by (seed, purpose, stream).  Streams never overlap, so independent
trajectories, estimation shards, and SDE paths can be produced in any order
and on any number of workers with identical results.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1

# purpose tags keep the stream spaces of different consumers disjoint
TRAJECTORY = 0
ENSEMBLE = 1
EULER = 2
GENERIC = 3

_PURPOSE_SHIFT = 56


def stream_generator(seed: int, stream: int = 0, purpose: int = TRAJECTORY) -> np.random.Generator:
    """Generator for one (seed, purpose, stream) key; the Philox counter is the
    position within the stream."""
    if not 0 <= stream < (1 << _PURPOSE_SHIFT):
        raise ValueError("stream id out of range")
    key = np.array([seed & MASK64, (purpose << _PURPOSE_SHIFT) | stream], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


class UniformBlocks:
    """Sequential uniforms from one stream, buffered in blocks.

    Philox output does not depend on call granularity, so a consumer walking
    this buffer sees exactly the same sequence as one drawing arrays straight
    from `stream_generator` with the same key.
    """

    def __init__(self, seed: int, stream: int, purpose: int = TRAJECTORY, block: int = 8192):
        self._gen = stream_generator(seed, stream, purpose)
        self._block = block
        self._buf = np.empty(0)
        self._pos = 0

    def next(self) -> float:
        if self._pos >= self._buf.size:
            self._buf = self._gen.random(self._block)
            self._pos = 0
        value = self._buf[self._pos]
        self._pos += 1
        return value
