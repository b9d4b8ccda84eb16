"""Deterministic seed derivation so every subsystem owns an independent stream.

All randomness in a run flows from one master seed; downstream components get
their seeds by stable hashing of (master seed, component labels).  Python's
builtin hash() is salted per process, so we hash with sha256 instead.
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK = (1 << 63) - 1


def derive_seed(*parts) -> int:
    """Map a tuple of ints/strings to a stable 63-bit seed."""
    text = "\x1f".join(repr(p) for p in parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little") & _MASK


def derived_rng(*parts) -> np.random.Generator:
    """Generator seeded by derive_seed(*parts)."""
    return np.random.default_rng(derive_seed(*parts))
