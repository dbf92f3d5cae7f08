import json
import math
from fractions import Fraction
from functools import lru_cache

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from insitu.errors import DependencyError, SizeError, ValidationError
from insitu.recurrence import (
    EULER_GAMMA,
    SIGMA2,
    ExactDistribution,
    asymptotic_residuals,
    exact_distribution,
    moments_exact,
    moments_extended,
)


@lru_cache(maxsize=None)
def naive_law(n):
    """Independent oracle: dict-of-Fractions convolution over the split index."""
    if n <= 1:
        return {0: Fraction(1)}
    out = {}
    for j in range(n):
        for a, pa in naive_law(j).items():
            for b, pb in naive_law(n - 1 - j).items():
                out[a + b + j] = out.get(a + b + j, Fraction(0)) + pa * pb / n
    return out


def test_small_laws():
    assert exact_distribution(1).probabilities == {0: 1}
    assert exact_distribution(2).probabilities == {0: Fraction(1, 2), 1: Fraction(1, 2)}
    assert exact_distribution(3).probabilities == {
        0: Fraction(1, 6),
        1: Fraction(1, 2),
        2: Fraction(1, 6),
        3: Fraction(1, 6),
    }


@pytest.mark.parametrize("n", range(1, 16))
def test_matches_naive_oracle(n):
    assert exact_distribution(n).probabilities == naive_law(n)


@pytest.mark.parametrize("n", [1, 2, 5, 17, 40])
def test_distribution_invariants(n):
    d = exact_distribution(n)
    assert sum(d.probabilities.values()) == 1
    assert d.support == (0, n * (n - 1) // 2)
    assert all(p > 0 for p in d.probabilities.values())


@pytest.mark.parametrize("n", [0, 41, -3])
def test_distribution_size_error(n):
    with pytest.raises(SizeError, match="40"):
        exact_distribution(n)


def test_cap_is_configurable():
    assert exact_distribution(45, cap=45).support == (0, 990)


def test_json_format():
    assert json.loads(exact_distribution(3).to_json()) == {
        "n": 3,
        "probabilities": {"0": "1/6", "1": "1/2", "2": "1/6", "3": "1/6"},
    }
    assert exact_distribution(1).to_dict()["probabilities"] == {"0": "1/1"}


@given(st.integers(1, 25))
@settings(max_examples=15, deadline=None)
def test_json_roundtrip(n):
    d = exact_distribution(n)
    assert ExactDistribution.from_json(d.to_json()) == d


def test_distribution_validation():
    with pytest.raises(ValidationError):
        ExactDistribution(2, {0: Fraction(1, 2)})
    with pytest.raises(ValidationError):
        ExactDistribution(2, {0: Fraction(1, 2), 5: Fraction(1, 2)})


def test_n3_moments_exact():
    table = moments_exact(3, mode="rational")
    assert table.mean[3] == Fraction(4, 3)
    assert table.variance[3] == Fraction(8, 9)
    assert table.kappa3[3] == Fraction(11, 27)
    assert table.third[3] == Fraction(19, 3)
    assert table.sigma2(3) == Fraction(8, 81)
    assert (table.mean[1], table.variance[1], table.kappa3[1]) == (0, 0, 0)
    assert (table.mean[0], table.second[0], table.third[0]) == (0, 0, 0)


def test_rational_moments_match_distributions(rational_table):
    for n in range(1, 13):
        d = exact_distribution(n)
        assert rational_table.mean[n] == d.mean()
        assert rational_table.second[n] == d.raw_moment(2)
        assert rational_table.third[n] == d.raw_moment(3)
        assert rational_table.variance[n] == d.variance()
        assert rational_table.kappa3[n] == d.kappa3()


def test_float_matches_rational(rational_table):
    table = moments_exact(200, mode="float")
    for n in range(1, 201):
        for name in ("mean", "variance", "kappa3", "second", "third"):
            exact = float(getattr(rational_table, name)[n])
            approx = getattr(table, name)[n]
            assert abs(approx - exact) <= 1e-12 * abs(exact) + 1e-300, (name, n)


def test_kappa3_of_two_is_zero(rational_table):
    # X_2 is a fair coin on {0, 1}: symmetric, so kappa3 = 0
    assert rational_table.kappa3[2] == 0


def test_kappa3_positive_from_three(big_table, rational_table):
    assert all(rational_table.kappa3[n] > 0 for n in range(3, 201))
    assert np.all(big_table.kappa3[3:] > 0)


def test_variance_nonnegative(big_table):
    assert np.all(big_table.variance >= 0)


@pytest.mark.parametrize("n_max", [1000, 10_000])
def test_float_against_extended_precision(big_table, n_max):
    ext = moments_extended(n_max)
    for name in ("mean", "variance", "kappa3"):
        a = getattr(big_table, name)[2 : n_max + 1]
        b = getattr(ext, name)[2 : n_max + 1].astype(float)
        rel = np.abs(a - b) / np.maximum(np.abs(b), 1e-300)
        rel[b == 0] = np.abs(a[b == 0])
        assert rel.max() < 1e-12, name


def test_moment_caps():
    with pytest.raises(SizeError):
        moments_exact(201, mode="rational")
    with pytest.raises(SizeError):
        moments_exact(30_001)
    with pytest.raises(ValueError):
        moments_exact(10, mode="decimal")


def test_csv_header(rational_table):
    text = rational_table.to_csv([1, 3])
    lines = text.splitlines()
    assert lines[0] == "n,mean,variance,kappa3,sigma2_n"
    assert lines[2].split(",")[0] == "3"
    assert float(lines[2].split(",")[4]) == pytest.approx(8 / 81, rel=1e-15)
    assert "\r" not in text


def test_table_coverage_error(rational_table):
    with pytest.raises(DependencyError):
        rational_table.row(201)


def test_residual_at_one():
    (res,) = asymptotic_residuals(moments_exact(5, mode="rational"), [1], m3=0.15)
    assert res.mean_residual == pytest.approx(2 - EULER_GAMMA, abs=1e-15)
    assert res.variance_residual == pytest.approx(SIGMA2, abs=1e-15)


def test_mean_residual_bounded_by_log(big_table, constants):
    grid = np.unique(np.geomspace(1000, 30_000, 12).astype(int))
    ratios = [r.mean_residual / math.log(r.n) for r in asymptotic_residuals(big_table, grid, constants.M3)]
    assert max(ratios) / min(ratios) < 1.2
    assert all(0 < x < 2 for x in ratios)


def test_variance_residual_bounded(big_table, constants):
    grid = np.unique(np.geomspace(1000, 30_000, 12).astype(int))
    vals = [r.variance_residual for r in asymptotic_residuals(big_table, grid, constants.M3)]
    assert max(abs(v) for v in vals) < 2
    assert max(vals) - min(vals) < 0.25 * max(abs(v) for v in vals)
