"""Deterministic seed derivation.

Every source of randomness in a run is an explicit function of the run seed
plus a string/int path, so results never depend on call order or on how many
workers execute clients.
"""

from __future__ import annotations

import hashlib

import numpy as np


def child_seed(*parts: int | str) -> int:
    """Derive a 64-bit seed from a path of ints/strings. Stable across runs."""
    key = "|".join(str(p) for p in parts).encode("utf-8")
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "big")


def rng_for(*parts: int | str) -> np.random.Generator:
    return np.random.default_rng(child_seed(*parts))
