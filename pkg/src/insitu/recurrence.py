"""Exact law and moments of the major cost ``X_n``.

The cost obeys the quicksort-type splitting law ``X_0 = 0`` and, for
``n >= 1``::

    X_n  =d  X_J + X'_{n-1-J} + J,        J uniform on {0, ..., n-1}

with ``X``, ``X'`` and ``J`` independent.  Distributions are computed with
integer arithmetic (``n! * P(X_n = k)`` is always an integer), moments either
with exact rationals or in binary64 with compensated summation.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from math import comb, factorial
from typing import NamedTuple, Sequence

import numba
import numpy as np

from .errors import DependencyError, DomainError, SizeError, ValidationError

DISTRIBUTION_CAP = 40
RATIONAL_MOMENT_CAP = 200
FLOAT_MOMENT_CAP = 30_000

EULER_GAMMA = 0.57721566490153286061
SIGMA2 = 2.0 - math.pi**2 / 6.0

MOMENT_CSV_HEADER = ("n", "mean", "variance", "kappa3", "sigma2_n")


# ---------------------------------------------------------------------------
# exact distributions


@dataclass(frozen=True)
class ExactDistribution:
    """Law of ``X_n`` as a map cost -> exact probability (zeros omitted)."""

    n: int
    probabilities: dict

    def __post_init__(self):
        if self.n < 1:
            raise ValidationError(f"n must be positive, got {self.n}")
        if sum(self.probabilities.values()) != 1:
            raise ValidationError("probabilities do not sum to 1")
        top = self.n * (self.n - 1) // 2
        for k, p in self.probabilities.items():
            if not 0 <= k <= top:
                raise ValidationError(f"cost {k} outside support [0, {top}]")
            if p <= 0:
                raise ValidationError(f"nonpositive probability at cost {k}")

    @property
    def support(self):
        return min(self.probabilities), max(self.probabilities)

    def raw_moment(self, r: int) -> Fraction:
        return sum((Fraction(k) ** r * p for k, p in self.probabilities.items()), Fraction(0))

    def mean(self) -> Fraction:
        return self.raw_moment(1)

    def variance(self) -> Fraction:
        m = self.mean()
        return self.raw_moment(2) - m * m

    def kappa3(self) -> Fraction:
        m, s, t = self.raw_moment(1), self.raw_moment(2), self.raw_moment(3)
        return t - 3 * m * s + 2 * m**3

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "probabilities": {
                str(k): f"{p.numerator}/{p.denominator}"
                for k, p in sorted(self.probabilities.items())
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "ExactDistribution":
        probs = {int(k): Fraction(v) for k, v in data["probabilities"].items()}
        return cls(int(data["n"]), probs)

    @classmethod
    def from_json(cls, text: str) -> "ExactDistribution":
        return cls.from_dict(json.loads(text))

    @classmethod
    def from_counts(cls, n: int, counts: Sequence[int]) -> "ExactDistribution":
        """Build from integer counts over ``n!`` equally likely outcomes."""
        total = factorial(n)
        probs = {k: Fraction(int(c), total) for k, c in enumerate(counts) if c}
        return cls(n, probs)


# counts[n][k] = n! * P(X_n = k); grown on demand and shared between calls
_counts: list = [np.array([1], dtype=object)]


def _extend_counts(n: int) -> None:
    for m in range(len(_counts), n + 1):
        out = np.zeros(m * (m - 1) // 2 + 1, dtype=object)
        for j in range(m):
            # (m-1)!/m! * m! splits into binom(m-1, j) j! (m-1-j)!
            conv = np.convolve(_counts[j], _counts[m - 1 - j]) * comb(m - 1, j)
            out[j : j + len(conv)] += conv
        _counts.append(out)


def exact_distribution(n: int, cap: int = DISTRIBUTION_CAP) -> ExactDistribution:
    """Exact law of ``X_n`` by bottom-up convolution over the split index.

    Parameters
    ----------
    n : int
        Problem size, ``1 <= n <= cap``.
    cap : int
        Upper limit on ``n``; the support grows like ``n**2 / 2`` and the
        integers like ``n!``.

    Examples
    --------
    >>> exact_distribution(3).to_dict()["probabilities"]
    {'0': '1/6', '1': '1/2', '2': '1/6', '3': '1/6'}
    """
    n = int(n)
    if not 1 <= n <= cap:
        raise SizeError(f"exact_distribution needs 1 <= n <= {cap} (cap), got {n}")
    _extend_counts(n)
    return ExactDistribution.from_counts(n, _counts[n])


# ---------------------------------------------------------------------------
# moments


@dataclass(frozen=True)
class MomentTable:
    """Per-``n`` moments of ``X_n`` for ``0 <= n <= n_max``.

    ``mean``, ``second`` and ``third`` are raw moments; ``variance`` and
    ``kappa3`` are central.  In ``"rational"`` mode every entry is a
    :class:`~fractions.Fraction`; in ``"float"`` mode entries are numpy
    float64 arrays.
    """

    n_max: int
    mode: str
    mean: Sequence
    second: Sequence
    third: Sequence
    variance: Sequence
    kappa3: Sequence

    def _check(self, n: int) -> None:
        if not 0 <= n <= self.n_max:
            raise DependencyError(f"moment table covers 0..{self.n_max}, asked for n={n}")

    def sigma2(self, n: int):
        """Normalized variance ``Var(X_n) / n**2``."""
        self._check(n)
        if n == 0:
            raise DomainError("sigma2(n) is undefined at n = 0")
        return self.variance[n] / (n * n)

    def row(self, n: int) -> tuple:
        self._check(n)
        s2 = self.variance[n] / (n * n) if n else 0
        return (n, self.mean[n], self.variance[n], self.kappa3[n], s2)

    def to_csv(self, n_values: Sequence[int] | None = None) -> str:
        if n_values is None:
            n_values = range(self.n_max + 1)
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(MOMENT_CSV_HEADER)
        for n in n_values:
            row = self.row(int(n))
            writer.writerow([row[0], *(repr(float(x)) for x in row[1:])])
        return buf.getvalue()


def _rational_moments(n_max: int) -> MomentTable:
    m = [Fraction(0)] * (n_max + 1)
    s = [Fraction(0)] * (n_max + 1)
    t = [Fraction(0)] * (n_max + 1)
    p0 = p1 = p2 = sum_s = sum_t = Fraction(0)  # prefix sums over j < n
    for n in range(1, n_max + 1):
        j = n - 1  # fold in index n-1 before evaluating level n
        p0 += m[j]
        p1 += j * m[j]
        p2 += j * j * m[j]
        sum_s += s[j]
        sum_t += t[j]
        mm = sum((m[i] * m[n - 1 - i] for i in range(n)), Fraction(0))
        sm = sum((s[i] * m[n - 1 - i] for i in range(n)), Fraction(0))
        q = n - 1
        m[n] = Fraction(q, 2) + 2 * p0 / n
        s[n] = (2 * sum_s + Fraction(q * n * (2 * n - 1), 6) + 2 * mm + 2 * q * p0) / n
        t[n] = (
            2 * sum_t
            + Fraction(q * n // 2) ** 2
            + 6 * sm
            + 3 * q * sum_s
            + 3 * (2 * p2 - 2 * q * p1 + q * q * p0)
            + 3 * q * mm
        ) / n
    var = [s[n] - m[n] ** 2 for n in range(n_max + 1)]
    k3 = [t[n] - 3 * m[n] * s[n] + 2 * m[n] ** 3 for n in range(n_max + 1)]
    return MomentTable(n_max, "rational", tuple(m), tuple(s), tuple(t), tuple(var), tuple(k3))


@numba.njit(cache=True)
def _add(total, comp, x):
    # Neumaier step: returns the updated (sum, compensation) pair
    y = total + x
    if abs(total) >= abs(x):
        comp += (total - y) + x
    else:
        comp += (x - y) + total
    return y, comp


@numba.njit(cache=True)
def _central_moment_kernel(n_max):
    # Law of total cumulance on the split index J:
    #   Var X   = E Var(X|J) + Var E(X|J)
    #   kappa3  = E kappa3(X|J) + 3 Cov(E(X|J), Var(X|J)) + kappa3(E(X|J))
    m = np.zeros(n_max + 1)
    v = np.zeros(n_max + 1)
    k3 = np.zeros(n_max + 1)
    sm, sm_c, sv, sv_c, sk, sk_c = 0.0, 0.0, 0.0, 0.0, 0.0, 0.0
    for n in range(1, n_max + 1):
        mn = (n - 1) / 2.0 + 2.0 * (sm + sm_c) / n
        vbar = 2.0 * (sv + sv_c) / n
        a2, c2, a3, c3, ac, cc = 0.0, 0.0, 0.0, 0.0, 0.0, 0.0
        for j in range(n):
            d = m[j] + m[n - 1 - j] + j - mn
            w = v[j] + v[n - 1 - j] - vbar
            a2, c2 = _add(a2, c2, d * d)
            a3, c3 = _add(a3, c3, d * d * d)
            ac, cc = _add(ac, cc, d * w)
        m[n] = mn
        v[n] = vbar + (a2 + c2) / n
        k3[n] = 2.0 * (sk + sk_c) / n + 3.0 * (ac + cc) / n + (a3 + c3) / n
        sm, sm_c = _add(sm, sm_c, m[n])
        sv, sv_c = _add(sv, sv_c, v[n])
        sk, sk_c = _add(sk, sk_c, k3[n])
    return m, v, k3


def _float_table(n_max, m, v, k3, mode="float") -> MomentTable:
    s = v + m * m
    t = k3 + 3 * m * s - 2 * m**3
    for arr in (m, s, t, v, k3):
        arr.flags.writeable = False
    return MomentTable(n_max, mode, m, s, t, v, k3)


def moments_exact(n_max: int, mode: str = "float") -> MomentTable:
    """Mean, variance and third cumulant of ``X_n`` for all ``n <= n_max``.

    ``mode="rational"`` runs the raw-moment recurrences in exact arithmetic
    (``n_max <= 200``).  ``mode="float"`` runs the equivalent central-moment
    recurrences in binary64 with compensated sums (``n_max <= 30000``);
    centering avoids the cancellation that raw moments suffer in ``kappa3``.
    """
    n_max = int(n_max)
    if mode == "rational":
        if not 1 <= n_max <= RATIONAL_MOMENT_CAP:
            raise SizeError(
                f"rational moments need 1 <= n_max <= {RATIONAL_MOMENT_CAP}, got {n_max}"
            )
        return _rational_moments(n_max)
    if mode == "float":
        if not 1 <= n_max <= FLOAT_MOMENT_CAP:
            raise SizeError(f"float moments need 1 <= n_max <= {FLOAT_MOMENT_CAP}, got {n_max}")
        return _float_table(n_max, *_central_moment_kernel(n_max))
    raise ValueError(f"mode must be 'rational' or 'float', got {mode!r}")


def moments_extended(n_max: int) -> MomentTable:
    """Same recurrences in x87 extended precision (numpy ``longdouble``).

    Vectorized per level with pairwise summation; slower than the float
    kernel and used only to spot-check it.
    """
    ld = np.longdouble
    m = np.zeros(n_max + 1, dtype=ld)
    v = np.zeros(n_max + 1, dtype=ld)
    k3 = np.zeros(n_max + 1, dtype=ld)
    sm = sv = sk = ld(0)
    for n in range(1, n_max + 1):
        j = np.arange(n, dtype=ld)
        mn = ld(n - 1) / 2 + 2 * sm / n
        vbar = 2 * sv / n
        d = m[:n] + m[n - 1 :: -1] + j - mn
        w = v[:n] + v[n - 1 :: -1] - vbar
        m[n] = mn
        v[n] = vbar + np.sum(d * d) / n
        k3[n] = 2 * sk / n + 3 * np.sum(d * w) / n + np.sum(d * d * d) / n
        sm += m[n]
        sv += v[n]
        sk += k3[n]
    return _float_table(n_max, m, v, k3, mode="extended")


# ---------------------------------------------------------------------------
# asymptotic expansions


class Residual(NamedTuple):
    n: int
    mean_residual: float
    variance_residual: float
    cumulant_residual: float


def asymptotic_residuals(
    table: MomentTable, n_values: Sequence[int] | None = None, m3: float | None = None
) -> list:
    """Deviations of the moments from their leading-order expansions.

    For each ``n``::

        mean_residual     = m_n - n ln n - (gamma - 2) n
        variance_residual = n * (sigma^2 - ln n / n - Var(X_n) / n^2)
        cumulant_residual = kappa3(X_n) / n^3 - M3

    ``m3`` defaults to the limit constant from :func:`insitu.limit.limit_constants`.
    """
    if m3 is None:
        from .limit import limit_constants

        m3 = limit_constants().M3
    if n_values is None:
        n_values = range(1, table.n_max + 1)
    out = []
    for n in n_values:
        n = int(n)
        if n < 1:
            raise DependencyError(f"residuals are defined for n >= 1, got {n}")
        table._check(n)
        ln = math.log(n)
        mean = float(table.mean[n])
        var = float(table.variance[n])
        k3 = float(table.kappa3[n])
        out.append(
            Residual(
                n,
                mean - n * ln - (EULER_GAMMA - 2.0) * n,
                n * (SIGMA2 - ln / n - var / (n * n)),
                k3 / n**3 - m3,
            )
        )
    return out
