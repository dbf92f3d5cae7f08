"""The limit law of the normalized cost and samplers for it.

``Y_n = (X_n - E X_n) / n`` converges in law to the centered solution of::

    Y  =d  U Y + (1 - U) Y* + C(U),    C(u) = (1-u) ln(1-u) + u ln u + u

with ``U`` uniform on [0, 1] and ``Y``, ``Y*``, ``U`` independent.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator

import numba
import numpy as np
from scipy import integrate

from . import _streams
from .errors import DependencyError, DomainError, PrecisionError, SizeError
from .recurrence import EULER_GAMMA, SIGMA2, MomentTable

# stream tags, kept apart from the permutation streams (tag 1)
_POOL_TAG = 2 << 32
_YN_TAG = 3 << 32

DEFAULT_TOLERANCE = 1e-10

# E Y^3 = 2 (3 sigma^2 A + B) with A = 1/36 (closed form) and
# B = int_0^1 C(u)^3 du = 0.04746807539694648843910609..., evaluated with
# mpmath at 30 digits.  limit_constants() recomputes it by quadrature.
M3_REFERENCE = 0.15411380631918857080


def toll_C(u):
    """``(1-u) ln(1-u) + u ln u + u`` with ``0 ln 0 = 0``.

    Accepts a scalar or an array; raises :class:`DomainError` outside [0, 1].

    >>> toll_C(0.0), toll_C(1.0)
    (0.0, 1.0)
    """
    arr = np.asarray(u, dtype=float)
    if not np.all((arr >= 0.0) & (arr <= 1.0)):
        raise DomainError("toll_C is defined on [0, 1]")
    with np.errstate(divide="ignore", invalid="ignore"):
        left = np.where(arr > 0.0, arr * np.log(np.where(arr > 0.0, arr, 1.0)), 0.0)
        right = np.where(arr < 1.0, (1.0 - arr) * np.log1p(-np.where(arr < 1.0, arr, 0.0)), 0.0)
    out = left + right + arr
    return float(out) if out.ndim == 0 else out


@numba.njit(cache=True)
def _toll(u):
    if u <= 0.0:
        return 0.0
    if u >= 1.0:
        return 1.0
    return (1.0 - u) * math.log1p(-u) + u * math.log(u) + u


def toll_finite(n: int, k: int, table: MomentTable):
    """Toll of the normalized recurrence for ``Y_n`` at split ``k``.

    ``(mu(k) + mu(n-1-k) - mu(n) + k) / n`` with ``mu`` the mean cost.  Exact
    when ``table`` is rational.
    """
    if not 0 <= k < n <= table.n_max:
        raise DependencyError(f"need 0 <= k < n <= {table.n_max}, got n={n}, k={k}")
    mu = table.mean
    num = mu[k] + mu[n - 1 - k] - mu[n] + k
    return num / n if isinstance(num, Fraction) else float(num) / n


# ---------------------------------------------------------------------------
# constants


@dataclass(frozen=True)
class LimitConstants:
    gamma: float
    sigma2: float
    A: float
    B: float
    M3: float
    integral_C: float
    three_integral_C2: float

    def to_dict(self) -> dict:
        return {"gamma": self.gamma, "sigma2": self.sigma2, "A": self.A, "B": self.B, "M3": self.M3}

    @property
    def rate_constant(self) -> float:
        """Leading coefficient of ``ln n / n`` in the moment lower bound."""
        return self.M3 / (4.0 * self.sigma2**2.5)


def _quad(f, tol):
    value, err = integrate.quad(f, 0.0, 1.0, epsabs=tol, epsrel=0.0, limit=500)
    if not err <= tol:
        raise PrecisionError(
            f"quadrature reached error {err:.3g} > tolerance {tol:.3g} (estimate {value!r})",
            estimate=value,
            error=err,
        )
    return value


def limit_constants(quadrature_tolerance: float = DEFAULT_TOLERANCE) -> LimitConstants:
    """Moments of the limit law from fixed-point identities.

    Taking expectations of the cube of both sides, with ``E Y = 0`` and
    ``E U^3 = E (1-U)^3 = 1/4``, gives::

        E Y^3 = 2 (3 sigma^2 A + B),
        A = int_0^1 C(u) (u^2 + (1-u)^2) du,   B = int_0^1 C(u)^3 du.

    ``integral_C`` (should be 0) and ``three_integral_C2`` (should equal
    ``sigma^2``) are returned for consistency checks.
    """
    tol = float(quadrature_tolerance)
    if not 0.0 < tol <= 1e-6:
        raise DomainError(f"quadrature tolerance must be in (0, 1e-6], got {tol}")
    A = _quad(lambda u: _toll(u) * (u * u + (1.0 - u) ** 2), tol)
    B = _quad(lambda u: _toll(u) ** 3, tol)
    c1 = _quad(_toll, tol)
    c2 = _quad(lambda u: _toll(u) ** 2, tol / 3.0)
    return LimitConstants(
        gamma=EULER_GAMMA,
        sigma2=SIGMA2,
        A=A,
        B=B,
        M3=2.0 * (3.0 * SIGMA2 * A + B),
        integral_C=c1,
        three_integral_C2=3.0 * c2,
    )


# ---------------------------------------------------------------------------
# population iteration


@dataclass(frozen=True)
class LimitPool:
    values: np.ndarray
    generation: int

    def summary(self) -> dict:
        """Sample moments with naive standard errors (i.i.d. approximation)."""
        y = self.values
        size = y.size
        mean = float(np.mean(y))
        d = y - mean
        d2 = d * d
        d3 = d2 * d
        root = math.sqrt(size)
        return {
            "size": size,
            "generation": self.generation,
            "mean": mean,
            "mean_se": float(np.std(y)) / root,
            "variance": float(np.mean(d2)),
            "variance_se": float(np.std(d2)) / root,
            "third_central": float(np.mean(d3)),
            "third_central_se": float(np.std(d3)) / root,
            "abs_third": float(np.mean(np.abs(d3))),
        }


@numba.njit(cache=True, parallel=True)
def _pool_step(prev, tag, seed):
    size = prev.size
    out = np.empty(size)
    for i in numba.prange(size):
        state = _streams.stream_key(seed, tag, i)
        state, u = _streams.next_float(state)
        state, a = _streams.next_below(state, size)
        state, b = _streams.next_below(state, size)
        out[i] = u * prev[a] + (1.0 - u) * prev[b] + _toll(u)
    return out


def iterate_limit(
    pool_size: int, seed: int, center: bool = True, threads: int | None = None
) -> Iterator[LimitPool]:
    """Yield the pool after generation 0, 1, 2, ... indefinitely.

    Each output sample of generation ``g`` uses its own stream keyed by
    ``(seed, g, index)``.  The map leaves the mean untouched (any shift of a
    solution is again a solution), so with ``center=True`` every generation
    is re-centered to pick the mean-zero solution; without it the pool mean
    drifts like a random walk of step ``sd / sqrt(pool_size)``.
    """
    pool_size = int(pool_size)
    if pool_size < 1:
        raise SizeError(f"pool_size must be positive, got {pool_size}")
    _streams.set_threads(threads)
    key = _streams.as_seed(seed)
    values = np.zeros(pool_size)
    generation = 0
    while True:
        snapshot = values.copy()
        snapshot.flags.writeable = False
        yield LimitPool(snapshot, generation)
        generation += 1
        values = _pool_step(values, _POOL_TAG + generation, key)
        if center:
            values -= np.mean(values)


def simulate_limit(
    pool_size: int,
    generations: int,
    seed: int,
    center: bool = True,
    threads: int | None = None,
) -> LimitPool:
    """Approximate the limit law by ``generations`` rounds of pool resampling.

    Starts from the all-zero pool.  The map contracts the ``l_3`` distance by
    ``2**(-1/3)`` per round, so about 40 rounds erase the initial bias.
    """
    generations = int(generations)
    if generations < 0:
        raise SizeError(f"generations must be nonnegative, got {generations}")
    for pool in iterate_limit(pool_size, seed, center=center, threads=threads):
        if pool.generation == generations:
            return pool


def sample_limit_recursive(size: int, depth: int = 12, seed: int = 0) -> np.ndarray:
    """Evaluate the fixed-point map on a full binary tree of given depth.

    Costs ``size * 2**depth`` toll evaluations; a slow independent check on
    :func:`simulate_limit` for small sizes.  Leaves are zero.
    """
    rng = np.random.default_rng(seed)

    def level(d, count):
        if d == 0:
            return np.zeros(count)
        u = rng.random(count)
        left = level(d - 1, count)
        right = level(d - 1, count)
        return u * left + (1.0 - u) * right + toll_C(u)

    return level(int(depth), int(size))


# ---------------------------------------------------------------------------
# finite-n sampler


@numba.njit(cache=True, parallel=True)
def _recursive_cost_kernel(n, trials, tag, seed):
    out = np.empty(trials, dtype=np.int64)
    for t in numba.prange(trials):
        state = _streams.stream_key(seed, tag, t)
        # pending subproblem sizes, all >= 2, summing to <= n
        stack = np.empty(n // 2 + 2, dtype=np.int64)
        top = 0
        total = 0
        if n >= 2:
            stack[0] = n
            top = 1
        while top > 0:
            top -= 1
            k = stack[top]
            state, j = _streams.next_below(state, k)
            total += j
            if j >= 2:
                stack[top] = j
                top += 1
            if k - 1 - j >= 2:
                stack[top] = k - 1 - j
                top += 1
        out[t] = total
    return out


def sample_cost_recursive(n: int, trials: int, seed: int, threads: int | None = None) -> np.ndarray:
    """Draw ``X_n`` by unrolling the splitting recurrence (O(n) per draw)."""
    n, trials = int(n), int(trials)
    if n < 1 or trials < 1:
        raise SizeError(f"need n >= 1 and trials >= 1, got n={n}, trials={trials}")
    _streams.set_threads(threads)
    return _recursive_cost_kernel(n, trials, _YN_TAG, _streams.as_seed(seed))


def simulate_Yn(
    n: int, trials: int, table: MomentTable, seed: int, threads: int | None = None
) -> np.ndarray:
    """Samples of ``(X_n - E X_n) / n`` centered with the exact mean from ``table``."""
    n = int(n)
    if n > table.n_max:
        raise DependencyError(f"moment table covers n <= {table.n_max}, need n={n}")
    costs = sample_cost_recursive(n, trials, seed, threads=threads)
    return (costs - float(table.mean[n])) / n
