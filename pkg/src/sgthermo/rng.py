"""Seedable, splittable random streams built on Philox counters.

A stream is named by a (seed, stream_id) pair. Streams sharing a seed but
carrying different stream ids key disjoint Philox counter sequences, so
parallel chains stay reproducible independently of scheduling.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_MASK64 = (1 << 64) - 1


def _splitmix64(x: int) -> int:
    """Finalizer of the splitmix64 generator; a 64-bit bijective mixer."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (x ^ (x >> 31)) & _MASK64


@dataclass(frozen=True)
class RngStream:
    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        """Fresh generator positioned at the start of this stream."""
        key = (self.seed & _MASK64) | ((self.stream_id & _MASK64) << 64)
        return np.random.Generator(np.random.Philox(key=key))

    def derive(self, *ids: int) -> "RngStream":
        """Child stream addressed by a tuple of integers (chain, replicate, ...)."""
        sid = self.stream_id
        for i in ids:
            sid = _splitmix64(sid ^ _splitmix64(i & _MASK64))
        return RngStream(self.seed, sid)


def as_generator(rng: "RngStream | np.random.Generator") -> np.random.Generator:
    """Accept either a stream or an already-instantiated generator."""
    if isinstance(rng, RngStream):
        return rng.generator()
    return rng
