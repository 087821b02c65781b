"""Deterministic seed derivation.

Per-item generators are derived by hashing a root seed together with string
tags (e.g. an utterance id), so results do not depend on processing order,
scheduling, or Python's salted hash().
"""

import hashlib

import numpy as np


def derive_seed(root: int, *tags: str) -> int:
    """Derive a 64-bit child seed from a root seed and string tags."""
    h = hashlib.blake2b(digest_size=8)
    h.update(int(root).to_bytes(8, "little", signed=False))
    for tag in tags:
        h.update(b"\x1f")
        h.update(tag.encode("utf-8"))
    return int.from_bytes(h.digest(), "little")


def generator(root: int, *tags: str) -> np.random.Generator:
    """Seeded PCG64 generator for (root, tags)."""
    return np.random.Generator(np.random.PCG64(derive_seed(root, *tags)))
