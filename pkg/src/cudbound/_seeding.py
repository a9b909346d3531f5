"""Deterministic seed splitting.

Every stochastic operation takes an explicit integer seed. Child streams are
derived by hashing ``(root, key_1, ..., key_k)`` through numpy's
``SeedSequence``, so replicate ``b`` of repetition ``r`` gets the same stream no
matter which worker runs it or in what order.
"""

import zlib

import numpy as np


def _as_key(key):
    if key is None:
        # unseeded: fresh OS entropy, as with ``np.random.default_rng(None)``
        return np.random.SeedSequence().entropy
    if isinstance(key, str):
        return zlib.crc32(key.encode("utf-8"))
    key = int(key)
    if key < 0:
        raise ValueError(f"seed keys must be nonnegative, got {key}")
    return key


def derive_seed(root, *keys):
    """Return a 63-bit integer seed for the child stream ``(root, *keys)``."""
    ss = np.random.SeedSequence([_as_key(root), *(_as_key(k) for k in keys)])
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def make_rng(seed, *keys):
    """Build a Generator for ``(seed, *keys)``; a Generator passes through."""
    if isinstance(seed, np.random.Generator):
        if keys:
            raise TypeError("cannot derive keyed streams from a Generator")
        return seed
    return np.random.default_rng(np.random.SeedSequence([_as_key(seed), *(_as_key(k) for k in keys)]))
