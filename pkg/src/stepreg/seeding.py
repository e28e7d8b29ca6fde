"""Deterministic random streams derived from one flat seed.

Every randomized operation takes a plain integer seed.  Independent
substreams (per replicate, per component) are derived by mixing a stable
tag into the seed via numpy's SeedSequence spawn keys:

    rng_from(seed, "psi", rep)  ->  Generator seeded by
        SeedSequence(entropy=seed, spawn_key=(crc32("psi"), rep))

String tags are hashed with crc32, which is stable across processes and
Python versions, so identical (seed, tags) always yield identical streams.
"""

from __future__ import annotations

import zlib

import numpy as np

__all__ = ["rng_from", "spawn_key"]


def spawn_key(*tags: int | str) -> tuple[int, ...]:
    """Map a sequence of int/str tags to a SeedSequence spawn key."""
    key = []
    for tag in tags:
        if isinstance(tag, str):
            key.append(zlib.crc32(tag.encode("utf-8")))
        else:
            key.append(int(tag))
    return tuple(key)


def rng_from(seed: int, *tags: int | str) -> np.random.Generator:
    """Generator for the substream of `seed` selected by `tags`.

    With no tags this is just the root stream of `seed`.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=spawn_key(*tags))
    return np.random.default_rng(ss)
