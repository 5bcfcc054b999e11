"""Splittable seed hierarchy.

Every random draw in the package comes from a ``numpy.random.Generator``
(PCG64 bit generator, ziggurat normals) built from
``SeedSequence(base_seed, spawn_key=keys)``. A key path such as
``(replication, stream, delta_index, b)`` therefore names an independent
stream, and results do not depend on the order in which streams are consumed
or on how the work is split across workers.
"""

from __future__ import annotations

import numpy as np

# Stream tags keep unrelated draws of one replication apart.
DESIGN = 0
RESPONSE = 1
OBSERVATION = 2
JITTER = 3
SUBSAMPLE = 4
CV = 5
THEORY = 6


def _as_key(seed):
    if isinstance(seed, np.random.SeedSequence):
        return seed.entropy, tuple(seed.spawn_key)
    if isinstance(seed, tuple):
        return int(seed[0]), tuple(int(k) for k in seed[1:])
    return int(seed), ()


def child(seed, *keys):
    """Seed for the sub-stream ``keys`` below ``seed``.

    ``seed`` may be an int, a tuple ``(base, k1, k2, ...)`` or a
    ``SeedSequence``; the result is a ``SeedSequence``.
    """
    entropy, path = _as_key(seed)
    return np.random.SeedSequence(entropy, spawn_key=path + tuple(int(k) for k in keys))


def rng(seed, *keys):
    """A fresh ``Generator`` on the stream ``keys`` below ``seed``."""
    if isinstance(seed, np.random.Generator) and not keys:
        return seed
    return np.random.Generator(np.random.PCG64(child(seed, *keys)))
