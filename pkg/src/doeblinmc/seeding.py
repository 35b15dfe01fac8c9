"""Deterministic random streams derived from a single root seed.

Every stochastic subsystem asks for its own generator keyed by a purpose tag
and integer indices, so results never depend on call order or thread count.
"""

import hashlib

import numpy as np

MAX_SEED = 2**64 - 1


def _tag_key(tag):
    digest = hashlib.sha256(tag.encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "little")


def derive_rng(root_seed, tag, *indices):
    """Return a ``numpy.random.Generator`` for ``(root_seed, tag, *indices)``.

    Parameters
    ----------
    root_seed : int
        Unsigned 64-bit root seed.
    tag : str
        Purpose tag, e.g. ``"gen"`` or ``"grad"``.
    *indices : int
        Non-negative integers (iteration, datapoint, block, ...).
    """
    if not 0 <= int(root_seed) <= MAX_SEED:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {root_seed}")
    key = (_tag_key(tag),) + tuple(int(i) for i in indices)
    if any(k < 0 for k in key):
        raise ValueError("stream indices must be non-negative")
    seq = np.random.SeedSequence(entropy=int(root_seed), spawn_key=key)
    return np.random.Generator(np.random.PCG64(seq))


def as_rng(rng):
    """Coerce ``None``, an int seed or a Generator into a Generator."""
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)
