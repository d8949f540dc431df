"""Per-component seeds derived from one master seed.

A tag path such as ``("fold", 3, "augment")`` is hashed to 64 bits, mixed
with the master seed, and passed through the splitmix64 finalizer. The same
(master, tags) always gives the same seed, and different tags give
unrelated seeds, so folds can run in any order or in parallel.
"""
from __future__ import annotations

import hashlib

MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def derive_seed(master: int, *tags) -> int:
    """A 31-bit seed (safe for numpy and torch alike) for ``tags`` under ``master``."""
    path = "/".join(str(t) for t in tags).encode()
    tag_hash = int.from_bytes(hashlib.sha256(path).digest()[:8], "little")
    return splitmix64((int(master) & MASK64) ^ tag_hash) & 0x7FFF_FFFF
