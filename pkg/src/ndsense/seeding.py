"""Deterministic RNG substreams derived from one master seed.

Every stochastic entry point accepts either a seed or a Generator. Named
substreams keep the medium, tracker-photon, and ODMR-photon streams
independent while remaining reproducible from a single master seed.
"""

from __future__ import annotations

import zlib

import numpy as np

__all__ = ["substream", "as_generator"]


def _key_part(part) -> int:
    if isinstance(part, (int, np.integer)):
        if part < 0:
            raise ValueError("substream key integers must be non-negative")
        return int(part)
    if isinstance(part, str):
        # crc32 is stable across platforms and python versions
        return zlib.crc32(part.encode("utf-8"))
    raise TypeError(f"substream key parts must be int or str, got {type(part)!r}")


def substream(master_seed: int, *key) -> np.random.Generator:
    """Return a Generator for the substream identified by ``key``.

    The same (master_seed, key) pair always yields an identical stream;
    distinct keys yield statistically independent streams.
    """
    ss = np.random.SeedSequence(int(master_seed), spawn_key=tuple(_key_part(k) for k in key))
    return np.random.default_rng(ss)


def as_generator(seed) -> np.random.Generator:
    """Coerce a seed, SeedSequence, or Generator into a Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)
