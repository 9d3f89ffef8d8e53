"""Seeded, splittable random streams.

A stream is identified by ``(seed, stream_id)``. The pair is hashed through
numpy's ``SeedSequence`` before it initializes a PCG64 generator, so distinct
ids give independent streams and equal ids give identical draws everywhere.
"""
from __future__ import annotations

import math

import numpy as np

MASK64 = (1 << 64) - 1


class SampleStream:
    """Single-owner random source keyed by ``(seed, stream_id)``."""

    __slots__ = ("seed", "stream_id", "_path", "gen")

    def __init__(self, seed: int = 0, stream_id: int = 0, _path: tuple = ()):
        if not (0 <= seed <= MASK64 and 0 <= stream_id <= MASK64):
            raise ValueError("seed and stream_id must be unsigned 64-bit integers")
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        self._path = _path
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id, *_path))
        self.gen = np.random.Generator(np.random.PCG64(ss))

    def derive(self, sub_id: int) -> "SampleStream":
        """Independent child stream, e.g. one per simulated copy."""
        return SampleStream(self.seed, self.stream_id, self._path + (int(sub_id),))

    def __repr__(self):
        return f"SampleStream(seed={self.seed}, stream_id={self.stream_id})"

    # scalar draws; thin wrappers so callers never touch numpy directly

    def random(self) -> float:
        """Uniform on [0, 1)."""
        return float(self.gen.random())

    def open_unit(self) -> float:
        """Uniform on (0, 1]."""
        return 1.0 - float(self.gen.random())

    def exponential(self) -> float:
        return -math.log(self.open_unit())

    def geometric(self, p: float) -> int:
        """Number of Bernoulli(p) trials up to and including the first success."""
        if p >= 1.0:
            return 1
        return int(self.gen.geometric(p))

    def integers(self, low: int, high: int) -> int:
        """Uniform integer in [low, high)."""
        return int(self.gen.integers(low, high))

    def binomial(self, n: int, p: float) -> int:
        if n <= 0 or p <= 0.0:
            return 0
        if p >= 1.0:
            return int(n)
        return int(self.gen.binomial(n, p))
