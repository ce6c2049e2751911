"""Seeded random streams.

Two generators are used, both counter-based and keyed by ``(master_seed, stream_id)``:

* :meth:`RngSeed.generator` returns a numpy ``Generator`` over Philox, used for
  permutation sampling and any vectorised draws.
* :func:`stream_word` is a SplitMix64-style hash of ``(key, counter)`` that can be
  called from compiled walk loops, so every Monte Carlo run owns an independent
  stream without constructing a generator object per run.
"""
from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

MASK64 = (1 << 64) - 1
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


@dataclass(frozen=True)
class RngSeed:
    master_seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("master_seed", "stream_id"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or not 0 <= int(v) <= MASK64:
                raise ValueError(f"{name} must be an unsigned 64-bit integer, got {v!r}")

    def generator(self) -> np.random.Generator:
        key = (int(self.stream_id) << 64) | int(self.master_seed)
        return np.random.Generator(np.random.Philox(key=key))

    def child(self, stream_id: int) -> "RngSeed":
        """Same master seed, different task stream."""
        return RngSeed(self.master_seed, stream_id)

    @property
    def key(self) -> int:
        """64-bit key for :func:`stream_word`."""
        return int(stream_key(np.uint64(self.master_seed), np.uint64(self.stream_id)))


@numba.njit(cache=True)
def mix64(z):
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


@numba.njit(cache=True)
def stream_key(master_seed, stream_id):
    a = mix64(master_seed + _GOLDEN)
    return mix64(a ^ mix64(stream_id * _GOLDEN + np.uint64(0x632BE59BD9B4E019)))


@numba.njit(cache=True)
def stream_word(key, counter):
    """The ``counter``-th 64-bit word of the stream identified by ``key``."""
    return mix64(key ^ mix64((counter + np.uint64(1)) * _GOLDEN))
