"""Probability-metric bounds and the convergence-rate series.

The Zolotarev distance ``zeta_3`` between two laws with equal first and
second moments is sandwiched by

    |E V^3 - E W^3| / 6  <=  zeta_3(V, W)
                         <=  (|V|_3^2 + |V|_3 |W|_3 + |W|_3^2) l_3(V, W) / 6

where ``l_p`` is the minimal ``L_p`` distance.  The supremum itself is never
evaluated; the lower side uses exact moments and the upper side Monte Carlo.
"""
from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DependencyError, DomainError, ValidationError
from .limit import LimitConstants, simulate_Yn, simulate_limit
from .recurrence import MomentTable

log = logging.getLogger(__name__)

RATE_CSV_HEADER = ("n", "sigma2_n", "lower_bound", "predicted", "upper_bound_estimate", "upper_se")


def lp_distance_empirical(a, b, p: float = 3.0) -> float:
    """Minimal ``l_p`` distance between two equal-size empirical laws.

    Sorting both samples realizes the quantile coupling, which is optimal for
    real-valued marginals.

    >>> lp_distance_empirical([0.0, 1.0], [3.0, 2.0], p=1)
    2.0
    """
    a = np.sort(np.asarray(a, dtype=float).ravel())
    b = np.sort(np.asarray(b, dtype=float).ravel())
    if a.size == 0 or b.size == 0:
        raise DomainError("samples must be nonempty")
    if a.size != b.size:
        raise ValidationError(f"samples must have equal size, got {a.size} and {b.size}")
    if not p >= 1:
        raise DomainError(f"p must be >= 1, got {p}")
    diff = np.abs(a - b)
    scale = diff.max()
    if scale == 0.0:
        return 0.0
    # scaling keeps |d|^p away from overflow/underflow for large p
    return float(scale * np.mean((diff / scale) ** p) ** (1.0 / p))


def zeta3_lower_bound(third_moment_v: float, third_moment_w: float) -> float:
    """``|E V^3 - E W^3| / 6`` for standardized ``V``, ``W``."""
    return abs(third_moment_v - third_moment_w) / 6.0


def zeta3_upper_bound(norm3_v: float, norm3_w: float, l3: float) -> float:
    if norm3_v < 0 or norm3_w < 0 or l3 < 0:
        raise DomainError("norms and l3 distance must be nonnegative")
    return (norm3_v**2 + norm3_v * norm3_w + norm3_w**2) * l3 / 6.0


def norm3(x) -> float:
    x = np.asarray(x, dtype=float)
    return float(np.mean(np.abs(x) ** 3) ** (1.0 / 3.0))


def standardized_third_moment(table: MomentTable, n: int) -> float:
    """``kappa3(X_n) / Var(X_n)^{3/2}``, i.e. ``E (Y_n / sigma(n))^3``."""
    var = float(table.variance[n])
    if var <= 0:
        raise DomainError(f"Var(X_{n}) = 0; standardization undefined")
    return float(table.kappa3[n]) / var**1.5


def lower_bound(table: MomentTable, constants: LimitConstants, n: int) -> float:
    limit_third = constants.M3 / constants.sigma2**1.5
    return zeta3_lower_bound(standardized_third_moment(table, n), limit_third)


@dataclass(frozen=True)
class MonteCarloConfig:
    """Sampling parameters for the upper-bound leg.

    ``samples`` is the size of both the ``Y_n`` sample and the limit pool.
    The standard error comes from ``batches`` disjoint sub-samples.
    """

    samples: int = 100_000
    generations: int = 50
    batches: int = 10
    seed: int = 0
    threads: int | None = None


@dataclass(frozen=True)
class RatePoint:
    n: int
    sigma2_n: float
    lower_bound: float
    predicted: float
    upper_bound_estimate: float | None = None
    upper_se: float | None = None

    def csv_row(self) -> list:
        row = [self.n, repr(self.sigma2_n), repr(self.lower_bound), repr(self.predicted)]
        for value in (self.upper_bound_estimate, self.upper_se):
            row.append("" if value is None else repr(value))
        return row


def _upper_estimate(v: np.ndarray, w: np.ndarray) -> float:
    return zeta3_upper_bound(norm3(v), norm3(w), lp_distance_empirical(v, w, 3.0))


def rate_series(
    n_values: Sequence[int],
    table: MomentTable,
    constants: LimitConstants,
    mc_config: MonteCarloConfig | None = None,
) -> list:
    """One :class:`RatePoint` per usable ``n`` (``n = 1`` is skipped).

    The lower bound compares exact standardized third moments; ``predicted``
    is ``M3 / (4 sigma^5) * ln n / n``.  With ``mc_config`` the upper bound is
    estimated between ``Y_n / sigma(n)`` and ``Y / sigma``.
    """
    n_values = [int(n) for n in n_values]
    if n_values and max(n_values) > table.n_max:
        raise DependencyError(f"moment table covers n <= {table.n_max}, need {max(n_values)}")
    pool = None
    if mc_config is not None:
        pool = simulate_limit(
            mc_config.samples, mc_config.generations, mc_config.seed, threads=mc_config.threads
        ).values / math.sqrt(constants.sigma2)

    points = []
    for n in n_values:
        if n <= 1:
            log.warning("n=%d excluded from rate series: Var(X_n) = 0", n)
            continue
        s2n = float(table.sigma2(n))
        point = dict(
            n=n,
            sigma2_n=s2n,
            lower_bound=lower_bound(table, constants, n),
            predicted=constants.rate_constant * math.log(n) / n,
        )
        if pool is not None:
            # per-n stream so points do not depend on which other n are requested
            v = simulate_Yn(
                n,
                mc_config.samples,
                table,
                seed=(mc_config.seed * 1_000_003 + n) % 2**63,
                threads=mc_config.threads,
            ) / math.sqrt(s2n)
            point["upper_bound_estimate"] = _upper_estimate(v, pool)
            parts = [
                _upper_estimate(vb, wb)
                for vb, wb in zip(
                    np.array_split(v, mc_config.batches), np.array_split(pool, mc_config.batches)
                )
            ]
            point["upper_se"] = float(np.std(parts, ddof=1) / math.sqrt(len(parts)))
        points.append(RatePoint(**point))
    return points


def rate_csv(points: Sequence[RatePoint]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(RATE_CSV_HEADER)
    for point in points:
        writer.writerow(point.csv_row())
    return buf.getvalue()


@dataclass(frozen=True)
class RateFit:
    intercept: float
    slope: float
    target: float

    @property
    def relative_error(self) -> float:
        return abs(self.intercept - self.target) / abs(self.target)


def fit_rate_constant(points: Sequence[RatePoint], target: float) -> RateFit:
    """Least squares of ``L_n n / ln n`` on ``[1, 1 / ln n]``.

    The intercept extrapolates the leading constant to ``n -> infinity``,
    removing the ``1 / ln n`` drift visible at moderate ``n``.
    """
    if len(points) < 2:
        raise ValidationError("need at least two rate points to fit")
    ln = np.log([pt.n for pt in points])
    y = np.array([pt.lower_bound * pt.n for pt in points]) / ln
    design = np.column_stack([np.ones_like(ln), 1.0 / ln])
    (intercept, slope), *_ = np.linalg.lstsq(design, y, rcond=None)
    return RateFit(float(intercept), float(slope), float(target))


def doubling_ratio(table: MomentTable, constants: LimitConstants, n: int) -> tuple:
    """``(L_{2n} / L_n, ln(2n) / (2 ln n))``."""
    ratio = lower_bound(table, constants, 2 * n) / lower_bound(table, constants, n)
    return ratio, math.log(2 * n) / (2 * math.log(n))


def log_grid(lo: int, hi: int, steps: int) -> list:
    """Distinct integers approximately evenly spaced in ``log n``."""
    if not 1 <= lo <= hi or steps < 1:
        raise DomainError(f"bad grid {lo}:{hi}:{steps}")
    if steps == 1:
        return [int(lo)]
    values = np.rint(np.geomspace(lo, hi, steps)).astype(int)
    return sorted(set(values.tolist()))
