"""Deterministic seed derivation.

All randomness in the package flows through generators created here, so a
whole experiment is a pure function of its master seed. Derived seeds use
SHA-256 over the rendered parts, which is stable across platforms and
Python versions (unlike hash()).
"""

import hashlib

import numpy as np


def derive_seed(*parts: object) -> int:
    """Collapse (master_seed, index, tag, ...) into a stable 64-bit seed."""
    text = "\x1f".join(repr(p) for p in parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def make_rng(*parts: object) -> np.random.Generator:
    """Generator seeded from derive_seed(*parts)."""
    return np.random.default_rng(derive_seed(*parts))
