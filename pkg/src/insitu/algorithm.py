"""MacLeod's in-situ permutation algorithm, instrumented.

Index ``i`` leads its cycle iff every element reached from ``p(i)`` before
returning to ``i`` is larger than ``i``.  The scan below follows ``p`` from
``p(i)`` while the current index exceeds ``i``; each step of that loop is one
unit of the *major cost*.  Only when the scan lands back on ``i`` is the
cycle rotated, so every cycle is moved exactly once with O(1) extra cells.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from itertools import permutations

import numba
import numpy as np

from . import _streams
from .errors import SizeError, ValidationError
from .recurrence import ExactDistribution

BRUTEFORCE_CAP = 8


class Permutation:
    """A bijection on ``{1, ..., n}``, stored 1-based as an int64 array."""

    __slots__ = ("mapping",)

    def __init__(self, mapping):
        arr = np.array(mapping, dtype=np.int64).reshape(-1)
        n = arr.size
        if n == 0:
            raise ValidationError("permutation must have length >= 1")
        if arr.min() < 1 or arr.max() > n:
            raise ValidationError(f"entries must lie in 1..{n}")
        seen = np.zeros(n + 1, dtype=bool)
        seen[arr] = True
        if not seen[1:].all():
            raise ValidationError("mapping is not a bijection (repeated index)")
        arr.flags.writeable = False
        self.mapping = arr

    def __len__(self):
        return self.mapping.size

    def __getitem__(self, i):
        return int(self.mapping[i - 1])

    def __eq__(self, other):
        return isinstance(other, Permutation) and np.array_equal(self.mapping, other.mapping)

    def __repr__(self):
        return f"Permutation({self.mapping.tolist()})"

    @classmethod
    def identity(cls, n):
        return cls(np.arange(1, n + 1))

    @classmethod
    def cyclic_shift(cls, n):
        """``(2, 3, ..., n, 1)``, the worst case for the leader scan."""
        return cls(np.roll(np.arange(1, n + 1), -1))

    @classmethod
    def parse(cls, text: str) -> "Permutation":
        """Read whitespace-separated 1-based indices."""
        try:
            values = [int(tok) for tok in text.split()]
        except ValueError as exc:
            raise ValidationError(f"permutation text is not integer tokens: {exc}") from None
        return cls(values)

    def cycle_count(self) -> int:
        # independent of the algorithm: mark-and-walk decomposition
        return int(_count_cycles(self.mapping))


@dataclass(frozen=True)
class CostRecord:
    search_steps: int
    value_writes: int
    cycle_leaders: int


@numba.njit(cache=True)
def _count_cycles(p):
    n = p.size
    seen = np.zeros(n + 1, dtype=np.bool_)
    cycles = 0
    for i in range(1, n + 1):
        if not seen[i]:
            cycles += 1
            j = i
            while not seen[j]:
                seen[j] = True
                j = p[j - 1]
    return cycles


@numba.njit(cache=True)
def _permute_kernel(x, p):
    # x is 0-based storage, p holds 1-based targets; arithmetic stays 1-based
    n = p.size
    steps = 0
    writes = 0
    leaders = 0
    for i in range(1, n + 1):
        j = p[i - 1]
        while j > i:
            j = p[j - 1]
            steps += 1
        if j == i:
            t = x[i - 1]
            j = i
            while p[j - 1] != i:
                x[j - 1] = x[p[j - 1] - 1]
                writes += 1
                j = p[j - 1]
            x[j - 1] = t
            writes += 1
            leaders += 1
    return steps, writes, leaders


@numba.njit(cache=True)
def _search_steps(p):
    n = p.size
    steps = 0
    for i in range(1, n + 1):
        j = p[i - 1]
        while j > i:
            j = p[j - 1]
            steps += 1
    return steps


def _permute_python(x, p):
    n = len(p)
    steps = writes = leaders = 0
    for i in range(1, n + 1):
        j = p[i - 1]
        while j > i:
            j = p[j - 1]
            steps += 1
        if j == i:
            t = x[i - 1]
            j = i
            while p[j - 1] != i:
                x[j - 1] = x[p[j - 1] - 1]
                writes += 1
                j = p[j - 1]
            x[j - 1] = t
            writes += 1
            leaders += 1
    return steps, writes, leaders


def permute_in_place(x, p) -> CostRecord:
    """Replace ``x`` by ``(x[p(1)], ..., x[p(n)])`` in place.

    ``x`` may be any mutable sequence; numeric numpy arrays take a compiled
    path.  ``p`` is a :class:`Permutation` or anything convertible to one and
    is never modified.  Validation happens before ``x`` is touched.

    >>> x = ["a", "b", "c"]
    >>> permute_in_place(x, [2, 3, 1])
    CostRecord(search_steps=3, value_writes=3, cycle_leaders=1)
    >>> x
    ['b', 'c', 'a']
    """
    if not isinstance(p, Permutation):
        p = Permutation(p)
    if len(x) != len(p):
        raise ValidationError(f"length mismatch: len(x)={len(x)}, len(p)={len(p)}")
    if isinstance(x, np.ndarray) and x.dtype.kind in "biuf" and x.ndim == 1:
        steps, writes, leaders = _permute_kernel(x, p.mapping)
    else:
        steps, writes, leaders = _permute_python(x, p.mapping.tolist())
    return CostRecord(int(steps), int(writes), int(leaders))


def cost_distribution_bruteforce(n: int) -> ExactDistribution:
    """Tally ``search_steps`` over all ``n!`` permutations (``n <= 8``)."""
    n = int(n)
    if n < 1:
        raise SizeError(f"n must be positive, got {n}")
    if n > BRUTEFORCE_CAP:
        raise SizeError(
            f"brute force enumerates n! permutations; n={n} exceeds {BRUTEFORCE_CAP}, "
            "use cost_sample for Monte Carlo instead"
        )
    tally = Counter()
    for perm in permutations(range(1, n + 1)):
        x = list(range(n))
        tally[permute_in_place(x, perm).search_steps] += 1
    counts = [tally.get(k, 0) for k in range(max(tally) + 1)]
    return ExactDistribution.from_counts(n, counts)


@numba.njit(cache=True)
def _shuffle(n, seed, index):
    state = _streams.stream_key(seed, 1, index)
    p = np.arange(1, n + 1)
    for i in range(n - 1, 0, -1):
        state, j = _streams.next_below(state, i + 1)
        tmp = p[i]
        p[i] = p[j]
        p[j] = tmp
    return p


@numba.njit(cache=True, parallel=True)
def _cost_sample_kernel(n, trials, seed):
    out = np.empty(trials, dtype=np.int64)
    for t in numba.prange(trials):
        out[t] = _search_steps(_shuffle(n, seed, t))
    return out


def random_permutation(n: int, seed: int, index: int = 0) -> Permutation:
    """The ``index``-th uniform permutation of the stream used by :func:`cost_sample`."""
    return Permutation(_shuffle(int(n), _streams.as_seed(seed), int(index)))


def cost_sample(n: int, trials: int, seed: int, threads: int | None = None) -> np.ndarray:
    """Major cost of ``trials`` independent uniform random permutations.

    Trial ``t`` draws its permutation from a stream keyed by ``(seed, t)``
    with a decrementing Fisher-Yates shuffle, so the output is fixed by
    ``(n, trials, seed)`` whatever the thread count.
    """
    n, trials = int(n), int(trials)
    if n < 1 or trials < 1:
        raise SizeError(f"need n >= 1 and trials >= 1, got n={n}, trials={trials}")
    _streams.set_threads(threads)
    return _cost_sample_kernel(n, trials, _streams.as_seed(seed))


def worst_case_steps(n: int) -> int:
    return n * (n - 1) // 2
