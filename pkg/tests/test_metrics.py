import logging
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from insitu.errors import DependencyError, DomainError, ValidationError
from insitu.metrics import (
    RATE_CSV_HEADER,
    MonteCarloConfig,
    doubling_ratio,
    fit_rate_constant,
    log_grid,
    lower_bound,
    lp_distance_empirical,
    rate_csv,
    rate_series,
    zeta3_lower_bound,
    zeta3_upper_bound,
)
from insitu.recurrence import moments_exact

finite = st.floats(-1e3, 1e3, allow_nan=False)


def samples(size):
    return arrays(np.float64, size, elements=finite)


def test_lp_identical_and_degenerate():
    a = np.array([0.3, -1.0, 2.5])
    assert lp_distance_empirical(a, a[::-1], 3) == 0.0
    assert lp_distance_empirical(np.zeros(5), np.full(5, -2.0), 2) == pytest.approx(2.0)


@given(samples(20), finite, st.floats(1, 8))
def test_lp_translation(a, c, p):
    assert lp_distance_empirical(a, a + c, p) == pytest.approx(abs(c), rel=1e-9, abs=1e-9)


@given(st.integers(1, 30).flatmap(lambda n: st.tuples(samples(n), samples(n), samples(n))), st.floats(1, 6))
@settings(max_examples=150)
def test_lp_triangle(abc, p):
    a, b, c = abc
    ab = lp_distance_empirical(a, b, p)
    bc = lp_distance_empirical(b, c, p)
    ac = lp_distance_empirical(a, c, p)
    assert ac <= ab + bc + 1e-9 * (1 + ab + bc)


@given(st.integers(1, 30).flatmap(lambda n: st.tuples(samples(n), samples(n))))
def test_lp_monotone_in_p(ab):
    a, b = ab
    values = [lp_distance_empirical(a, b, p) for p in (1, 1.5, 2, 3, 5)]
    assert all(x <= y * (1 + 1e-12) + 1e-300 for x, y in zip(values, values[1:]))


def test_lp_quantile_coupling_beats_other_pairings():
    rng = np.random.default_rng(0)
    a, b = rng.normal(size=7), rng.exponential(size=7)
    best = lp_distance_empirical(a, b, 3)
    for _ in range(200):
        pairing = rng.permutation(7)
        assert best <= np.mean(np.abs(a - b[pairing]) ** 3) ** (1 / 3) + 1e-12


def test_lp_errors():
    with pytest.raises(DomainError):
        lp_distance_empirical([], [], 2)
    with pytest.raises(DomainError):
        lp_distance_empirical([1.0], [2.0], 0.5)
    with pytest.raises(ValidationError):
        lp_distance_empirical([1.0, 2.0], [2.0], 2)


def test_bound_formulas():
    assert zeta3_lower_bound(0.7, 0.7) == 0
    assert zeta3_lower_bound(1, 0) == pytest.approx(1 / 6)
    assert zeta3_upper_bound(0.3, 2.0, 0.0) == 0
    assert zeta3_upper_bound(1, 1, 1) == pytest.approx(0.5)
    with pytest.raises(DomainError):
        zeta3_upper_bound(-1, 1, 1)


@given(finite, finite, st.floats(-10, 10))
def test_lower_bound_scales_cubically(a, b, c):
    assert zeta3_lower_bound(c**3 * a, c**3 * b) == pytest.approx(
        abs(c) ** 3 * zeta3_lower_bound(a, b), rel=1e-9, abs=1e-9
    )


@given(st.floats(0, 100), st.floats(0, 100), st.floats(0, 100), st.floats(-10, 10))
def test_upper_bound_scales_cubically(v, w, l3, c):
    k = abs(c)
    assert zeta3_upper_bound(k * v, k * w, k * l3) == pytest.approx(
        k**3 * zeta3_upper_bound(v, w, l3), rel=1e-9, abs=1e-12
    )


def test_lower_bound_n3(constants):
    table = moments_exact(3, mode="rational")
    expected = abs((11 / 27) / (27 * (8 / 81) ** 1.5) - constants.M3 / constants.sigma2**1.5) / 6
    assert lower_bound(table, constants, 3) == pytest.approx(expected, rel=1e-14)


def test_rate_series_small(constants, caplog):
    table = moments_exact(10, mode="rational")
    with caplog.at_level(logging.WARNING):
        points = rate_series([1, 3, 10], table, constants)
    assert [p.n for p in points] == [3, 10]
    assert "excluded" in caplog.text
    assert points[0].sigma2_n == pytest.approx(8 / 81, rel=1e-15)
    assert points[0].upper_bound_estimate is None
    assert points[1].predicted == pytest.approx(constants.rate_constant * math.log(10) / 10)
    assert all(p.lower_bound >= 0 for p in points)


def test_rate_series_table_coverage(constants):
    with pytest.raises(DependencyError):
        rate_series([50], moments_exact(10), constants)


def test_rate_csv(constants):
    table = moments_exact(100)
    text = rate_csv(rate_series([10, 100], table, constants))
    lines = text.splitlines()
    assert lines[0] == ",".join(RATE_CSV_HEADER)
    assert lines[1].endswith(",,")


def test_rate_series_deterministic_lower(constants, big_table):
    a = rate_series([1000, 5000], big_table, constants)
    b = rate_series([5000], big_table, constants)
    assert a[1] == b[0]


def test_monte_carlo_sandwich_n1000(constants, big_table):
    mc = MonteCarloConfig(samples=100_000, seed=3)
    (pt,) = rate_series([1000], big_table, constants, mc)
    assert pt.upper_bound_estimate is not None and math.isfinite(pt.upper_bound_estimate)
    assert pt.upper_bound_estimate + 3 * pt.upper_se >= pt.lower_bound
    assert pt.upper_se > 0


def test_fit_recovers_synthetic_constant():
    from insitu.metrics import RatePoint

    pts = []
    for n in [1000, 3000, 10_000, 30_000]:
        ln = math.log(n)
        lb = (0.5 - 1.2 / ln) * ln / n
        pts.append(RatePoint(n, 0.35, lb, 0.0))
    fit = fit_rate_constant(pts, 0.5)
    assert fit.intercept == pytest.approx(0.5, abs=1e-12)
    assert fit.slope == pytest.approx(-1.2, abs=1e-10)
    assert fit.relative_error < 1e-10


def test_doubling_ratio_trend(constants, big_table):
    ratio, expected = doubling_ratio(big_table, constants, 10_000)
    assert abs(ratio / expected - 1) < 0.10


def test_log_grid():
    g = log_grid(1000, 30_000, 12)
    assert g[0] == 1000 and g[-1] == 30_000
    assert len(g) == 12
    assert log_grid(5, 5, 1) == [5]
    with pytest.raises(DomainError):
        log_grid(10, 5, 3)
