"""Labeled RNG substreams derived from a single root seed.

Every stochastic routine in the package takes an explicit
``numpy.random.Generator``; nothing reads global RNG state. Substreams keep
modules decoupled: changing how many draws one consumer makes never shifts
another consumer's stream.
"""

from __future__ import annotations

import zlib

import numpy as np


def substream(seed: int, *labels: object) -> np.random.Generator:
    """Return a generator for the (seed, labels...) stream.

    The same (seed, labels) pair always yields an identical stream; distinct
    labels yield statistically independent streams.
    """
    key = tuple(zlib.crc32(repr(label).encode("utf-8")) for label in labels)
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def as_rng(seed_or_rng: int | np.random.Generator) -> np.random.Generator:
    """Accept either an integer seed or an already-built generator."""
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return np.random.default_rng(seed_or_rng)
