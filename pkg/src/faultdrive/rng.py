"""Deterministic seed derivation and random-stream construction.

Every source of randomness in the harness is a named PCG64 stream derived
from integer/string labels via SHA-256, so a campaign is a pure function of
its master seed. Stream derivation rules are part of the reproducibility
contract (see docs/schema.md).
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(*parts) -> int:
    """Collapse labels into a stable 64-bit seed.

    Parts are joined by '|' on their str() forms and hashed with SHA-256;
    the first 8 bytes (big-endian) become the seed.
    """
    text = "|".join(str(p) for p in parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def stream(*parts) -> np.random.Generator:
    """A PCG64 generator seeded from derive_seed(*parts)."""
    return np.random.Generator(np.random.PCG64(derive_seed(*parts)))
