"""Seed handling.

All randomness flows from explicit seeds. Child streams are derived with
``SeedSequence`` spawn keys so that, e.g., the stream for (run seed 3,
iteration 7, "train") never depends on how many other streams were drawn.
"""

import zlib

import numpy as np


def _key(part):
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    return int(part)


def seed_sequence(seed, *keys):
    """SeedSequence for ``seed`` with a deterministic spawn key built from ``keys``."""
    if isinstance(seed, np.random.SeedSequence):
        base_key = tuple(seed.spawn_key)
        return np.random.SeedSequence(
            entropy=seed.entropy, spawn_key=base_key + tuple(_key(k) for k in keys)
        )
    return np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(_key(k) for k in keys))


def make_rng(seed, *keys):
    """A fresh PCG64 generator for ``seed`` and optional derivation keys."""
    return np.random.Generator(np.random.PCG64(seed_sequence(seed, *keys)))


def child_seed(seed, *keys):
    """An integer seed derived from ``seed`` and ``keys``; stable across runs."""
    return int(seed_sequence(seed, *keys).generate_state(1, dtype=np.uint64)[0] >> 1)
