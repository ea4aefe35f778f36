"""Counter-based seed derivation.

Every random stream is addressed by ``(seed, *key)`` through
:class:`numpy.random.SeedSequence` spawn keys, so a stream depends only on
its address and never on the order in which streams are consumed.
"""
import numpy as np

# stream namespaces
PLAN = 1
FIT = 2
SAMPLER = 3
DATA = 4
REFERENCE = 5
REPETITION = 6
PLAN_REDRAW = 7
MC = 8


def stream(seed, *key):
    """Return a ``Generator`` for the stream addressed by ``(seed, *key)``."""
    ss = np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=tuple(int(k) for k in key))
    return np.random.default_rng(ss)


def derive(seed, *key):
    """Derive a 63-bit integer seed from ``(seed, *key)``."""
    ss = np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))
