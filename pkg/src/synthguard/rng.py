"""Counter-based random streams.

Every stochastic routine takes an explicit ``numpy.random.Generator``.  Streams
are Philox generators keyed by a root seed plus a path of names, so that
``derive(seed, "train", "simple")`` is stable no matter which other streams
were drawn before it.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _key(names: tuple[str | int, ...]) -> list[int]:
    words = []
    for name in names:
        digest = hashlib.sha256(str(name).encode("utf-8")).digest()
        words.append(int.from_bytes(digest[:4], "little"))
    return words


def derive(seed: int, *names: str | int) -> np.random.Generator:
    """Return an independent generator for ``(seed, *names)``."""
    seq = np.random.SeedSequence([int(seed) & 0xFFFFFFFF, *_key(names)])
    return np.random.Generator(np.random.Philox(seq))


def split(rng: np.random.Generator, n: int) -> list[np.random.Generator]:
    """Split ``rng`` into ``n`` child generators (advances ``rng``)."""
    seeds = rng.integers(0, 2**32, size=(n, 4), dtype=np.uint64)
    return [np.random.Generator(np.random.Philox(np.random.SeedSequence(s.tolist()))) for s in seeds]
