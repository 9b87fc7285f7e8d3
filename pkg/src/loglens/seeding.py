"""Deterministic RNG streams derived from integer/string keys."""

import hashlib

import numpy as np


def _normalize(key):
    if isinstance(key, str):
        return int.from_bytes(hashlib.sha256(key.encode()).digest()[:8], "little")
    return int(key) % (1 << 63)


def make_rng(*keys):
    """PCG64 generator whose stream is a pure function of the key tuple.

    Mixing e.g. (seed, line_index) gives independent per-item streams, so
    work can be resumed or parallelized without changing results.
    """
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([_normalize(k) for k in keys])))


def mix_seed(*keys):
    """Fold a key tuple into a single integer seed."""
    h = hashlib.sha256()
    for k in keys:
        h.update(repr(k).encode())
        h.update(b"\x1f")
    return int.from_bytes(h.digest()[:8], "little")
