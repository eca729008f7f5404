"""Deterministic counter-based random streams.

Every random decision in the package draws from a stream keyed by a tuple of
ints/strings (seed, purpose, indices...). Keys are hashed with SHA-256 into a
Philox key, so a stream is a pure function of its key tuple: same key, same
draws, on every platform and in any evaluation order. This is what makes
training runs, walks, dropout masks, and synthetic corpora bit-reproducible.
"""

from __future__ import annotations

import hashlib

import numpy as np


def digest_key(*parts: int | str) -> np.ndarray:
    """Hash a key tuple to two uint64 words for Philox."""
    h = hashlib.sha256()
    for p in parts:
        if isinstance(p, str):
            h.update(b"s" + p.encode("utf-8"))
        elif isinstance(p, (int, np.integer)):
            h.update(b"i" + int(p).to_bytes(16, "little", signed=True))
        else:
            raise TypeError(f"stream key parts must be int or str, got {type(p)!r}")
        h.update(b"\x00")
    return np.frombuffer(h.digest()[:16], dtype=np.uint64).copy()


def stream(*parts: int | str) -> np.random.Generator:
    """Independent generator for the given key tuple."""
    return np.random.Generator(np.random.Philox(key=digest_key(*parts)))
