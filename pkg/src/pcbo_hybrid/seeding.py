"""Seed splitting.

Every random stream in the package is derived from one integer seed plus a
sequence of string/int tags::

    rng = spawn_rng(seed, "hrqaoa", round_index, "donor", donor_index)

Tags are hashed with CRC-32 (stable across processes and platforms, unlike
``hash``) and fed together with the seed into :class:`numpy.random.SeedSequence`.
The generator is numpy's PCG64.
"""
from __future__ import annotations

import zlib

import numpy as np


def _tag_word(tag) -> int:
    if isinstance(tag, (int, np.integer)):
        if tag < 0:
            raise ValueError("integer tags must be non-negative")
        return int(tag)
    return zlib.crc32(str(tag).encode("utf-8"))


def derive_seed(seed: int, *tags) -> int:
    """Return a 63-bit child seed for ``seed`` and ``tags``."""
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, *(_tag_word(t) for t in tags)])
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def spawn_rng(seed: int, *tags) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(derive_seed(seed, *tags)))
