"""Seed derivation: every random stream is keyed by (seed, label, counter...)."""
import hashlib

import numpy as np


def label_key(label: str) -> int:
    digest = hashlib.blake2b(label.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def rng(seed: int, label: str, *counter: int) -> np.random.Generator:
    """Generator for the stream named `label`; adding labels never shifts other streams."""
    if seed < 0:
        raise ValueError("seed must be non-negative")
    ss = np.random.SeedSequence([int(seed), label_key(label), *[int(c) for c in counter]])
    return np.random.Generator(np.random.PCG64(ss))


def rademacher_signs(seed: int, m: int, start: int, stop: int) -> np.ndarray:
    """Sign vectors for draws start..stop-1, each a pure function of (seed, draw index)."""
    out = np.empty((stop - start, m))
    for row, i in enumerate(range(start, stop)):
        out[row] = rng(seed, "sigma", i).integers(0, 2, size=m) * 2.0 - 1.0
    return out
