"""Counter-based random streams for numba kernels.

Every trial / sample gets its own stream keyed by ``(seed, a, b)``, so
results never depend on how work is split across threads.
"""
import os

import numba
import numpy as np

# The bundled TBB is too old for numba and triggers a warning on every
# parallel launch; the workqueue layer is always available.
if "NUMBA_THREADING_LAYER" not in os.environ:
    numba.config.THREADING_LAYER = "workqueue"

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_ZERO = np.uint64(0)
_MASK = (1 << 64) - 1


@numba.njit(cache=True)
def mix64(z):
    """splitmix64 finalizer."""
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@numba.njit(cache=True)
def stream_key(seed, a, b):
    h = mix64(seed + _GOLDEN)
    h = mix64(h ^ np.uint64(a))
    return mix64((h + _GOLDEN) ^ np.uint64(b))


@numba.njit(cache=True)
def next_u64(state):
    """Advance a splitmix64 state; returns ``(state, output)``."""
    state = state + _GOLDEN
    return state, mix64(state)


@numba.njit(cache=True)
def next_float(state):
    """Uniform double on [0, 1) with 53 random bits."""
    state, x = next_u64(state)
    return state, (x >> _S11) * (1.0 / 9007199254740992.0)


@numba.njit(cache=True)
def next_below(state, k):
    """Exactly uniform integer on ``{0, ..., k-1}`` (k >= 1).

    Rejects the low ``2**64 mod k`` outputs so every residue class has the
    same number of preimages.
    """
    kk = np.uint64(k)
    threshold = (_ZERO - kk) % kk
    while True:
        state, x = next_u64(state)
        if x >= threshold:
            return state, np.int64(x % kk)


def as_seed(seed):
    """Normalise a user seed to a ``np.uint64``."""
    seed = int(seed)
    if seed < 0:
        raise ValueError(f"seed must be nonnegative, got {seed}")
    return np.uint64(seed & _MASK)


def set_threads(threads):
    """Cap numba worker threads; results do not depend on this value."""
    if threads is None:
        return
    numba.set_num_threads(max(1, min(int(threads), numba.config.NUMBA_NUM_THREADS)))
