"""Deterministic randomness, organized as named substreams of one run seed.

Every stochastic site in the package (weight init, dropout, shuffling,
sampling, data synthesis) draws from its own substream so that adding or
reordering one consumer never perturbs another.  A substream is a
counter-based Philox generator keyed by hashing the run seed together
with the path of names that identifies the site.
"""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["substream"]


def _key(seed: int, parts: tuple) -> int:
    text = "/".join(str(p) for p in (seed, *parts))
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:16], "little")


def substream(seed: int, *parts: object) -> np.random.Generator:
    """Return a fresh generator for the site named by ``parts``.

    The same ``(seed, parts)`` pair always yields a generator that
    produces the identical draw sequence, on any platform.
    """
    if not isinstance(seed, int):
        raise TypeError(f"seed must be an int, got {type(seed).__name__}")
    return np.random.Generator(np.random.Philox(key=_key(seed, parts)))
