"""Deterministic splittable random streams.

Every stochastic routine in the package draws from a stream addressed by
(seed, *path), where the path is a tuple of small integers such as
(replica,) or (replica, trajectory).  Streams with different addresses are
independent, and the same address always yields the same bits, which is what
makes replica-level parallelism and nested-level coupling reproducible.
"""

from __future__ import annotations

import numpy as np

__all__ = ["stream", "spawn_key"]

_MASK64 = (1 << 64) - 1


def spawn_key(seed: int, *path: int) -> tuple[int, ...]:
    if not (0 <= seed <= _MASK64):
        raise ValueError("seed must fit in 64 bits")
    for p in path:
        if p < 0:
            raise ValueError("stream path entries must be nonnegative")
    return (int(seed),) + tuple(int(p) for p in path)


def stream(seed: int, *path: int) -> np.random.Generator:
    """Return the Generator for stream address (seed, *path).

    Counter-based (Philox) so that draws are reproducible regardless of
    the order in which sibling streams are consumed.
    """
    ss = np.random.SeedSequence(spawn_key(seed, *path))
    return np.random.Generator(np.random.Philox(ss))
