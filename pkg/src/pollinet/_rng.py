"""Seed handling.

Every random component draws from its own PCG64 stream.  A stream is keyed by
``SeedSequence(entropy=seed, spawn_key=(stream_id, *extra))`` so that the
traits, graph, weights and dynamics of a run can each be regenerated without
replaying the others.
"""

import numpy as np

TRAITS = 0
GRAPH = 1
WEIGHTS = 2
DYNAMICS = 3
FLUCTUATIONS = 4


def stream(seed, stream_id, *extra):
    """Return an independent ``Generator`` for ``(seed, stream_id, *extra)``."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(stream_id), *map(int, extra)))
    return np.random.Generator(np.random.PCG64(ss))
