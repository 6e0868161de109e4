"""Deterministic sub-seed derivation so every pipeline stage is reproducible
independently of execution order."""

from __future__ import annotations

import hashlib

import numpy as np

MASK64 = (1 << 64) - 1


def subseed(master: int, *parts) -> int:
    """Derive a 64-bit sub-seed from a master seed and a label path.

    The same (master, parts) always maps to the same value, and distinct
    label paths give independent streams, e.g. subseed(s, "cluster", g).
    """
    key = "\x1f".join(str(p) for p in (int(master) & MASK64, *parts))
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def rng_for(master: int, *parts) -> np.random.Generator:
    """Generator seeded by subseed(master, *parts)."""
    return np.random.default_rng(subseed(master, *parts))
