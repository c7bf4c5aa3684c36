"""Counter-based random streams.

All randomness in the package is derived from a single root seed through
Philox counter-based generators.  A stream is addressed by a path of up to
three nonnegative integers (for instance ``(agent, time, replicate)``); two
streams with distinct paths never overlap as long as each draws fewer than
2**64 blocks, because the path occupies the high words of the 256-bit Philox
counter.
"""

from __future__ import annotations

import numpy as np

_SALT = 0x5B43455254  # keeps package streams apart from a bare Philox(seed)


class RandomStreams:
    """Factory of independent generators addressed by integer paths."""

    def __init__(self, seed: int):
        if seed < 0:
            raise ValueError("seed must be a nonnegative integer")
        self.seed = int(seed)

    def stream(self, *path: int) -> np.random.Generator:
        if len(path) > 3:
            raise ValueError("stream path is at most 3 integers")
        counter = [0, 0, 0, 0]
        for i, p in enumerate(path):
            if p < 0:
                raise ValueError("stream path entries must be nonnegative")
            counter[1 + i] = int(p) % (2**64)
        bitgen = np.random.Philox(key=[self.seed, _SALT], counter=counter)
        return np.random.Generator(bitgen)


def as_streams(rng) -> RandomStreams:
    """Accept either a root seed or an existing RandomStreams."""
    if isinstance(rng, RandomStreams):
        return rng
    return RandomStreams(int(rng))
