"""Seeded random streams.

Every consumer of randomness asks for its own stream, keyed by the run seed
plus labels, so adding draws in one place never shifts another stream.
"""

import zlib

import numpy as np


def _key(part: int | str) -> int:
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    return int(part) & 0xFFFFFFFFFFFFFFFF


def derive_rng(seed: int, *labels: int | str) -> np.random.Generator:
    """A generator determined by ``seed`` and the given labels."""
    return np.random.default_rng(np.random.SeedSequence([_key(seed), *(_key(label) for label in labels)]))


def derive_seed(seed: int, *labels: int | str) -> int:
    """A 63-bit integer seed determined by ``seed`` and the given labels."""
    return int(derive_rng(seed, *labels).integers(0, 2**63 - 1))
