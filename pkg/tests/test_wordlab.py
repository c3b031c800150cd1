from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from georecords.exactmeans import expected_position_exact, expected_value_exact
from georecords.qkernel import DomainError, make_model
from georecords.wordlab import (
    RecordView,
    enumerate_brute,
    enumerate_truncated,
    geometric_from_uniform,
    monte_carlo,
    monte_carlo_multi,
    permutation_enumerate,
    rth_from_right,
    sample_permutations,
    sample_word,
    scan_records,
    truncation_level,
)


def test_scan_records_is_strict():
    assert scan_records([2, 2, 1, 3, 3, 5]) == [(1, 2), (4, 3), (6, 5)]
    assert scan_records([]) == []


def test_rth_from_right():
    recs = scan_records([1, 3, 2, 4])
    assert rth_from_right(recs, 1) == RecordView(True, 4, 3)
    assert rth_from_right(recs, 3) == RecordView(True, 1, 0)
    assert rth_from_right(recs, 4) == RecordView(False)
    with pytest.raises(DomainError):
        rth_from_right(recs, 0)


def test_geometric_inverse_cdf():
    assert geometric_from_uniform(1.0, 0.5) == 1
    assert geometric_from_uniform(0.5, 0.5) == 2
    assert geometric_from_uniform(0.49, 0.5) == 2
    assert geometric_from_uniform(0.25, 0.5) == 3


def test_sampler_goodness_of_fit():
    rng = np.random.Generator(np.random.PCG64(11))
    m = make_model("1/3")
    letters = np.array([sample_word(50, m, rng) for _ in range(400)]).ravel()
    q, p = 1 / 3, 2 / 3
    K = 6
    observed = np.array([np.sum(letters == k) for k in range(1, K)] + [np.sum(letters >= K)])
    probs = np.array([p * q ** (k - 1) for k in range(1, K)] + [q ** (K - 1)])
    res = stats.chisquare(observed, probs * letters.size)
    assert res.pvalue > 1e-3


def test_enumeration_small_example():
    # n = 1, M = 3, q = 1/2: truncated mean 1/2 + 2/4 + 3/8 = 11/8
    res = enumerate_truncated(1, 3, 1, Fraction(1, 2))
    assert res.value_mean == Fraction(11, 8)
    assert res.left_count_mean == 0
    assert res.tail_bound_value == Fraction(5, 8)


@given(st.integers(1, 4), st.integers(1, 5), st.integers(1, 4),
       st.sampled_from([Fraction(1, 2), Fraction(1, 3), Fraction(2, 3)]))
def test_dp_enumeration_equals_brute_force(n, M, r, q):
    a, b = enumerate_truncated(n, M, r, q), enumerate_brute(n, M, r, q)
    assert (a.value_mean, a.left_count_mean) == (b.value_mean, b.left_count_mean)


def test_tail_bounds_cover_the_truncation():
    q = Fraction(1, 2)
    n, r = 3, 1
    lo = enumerate_truncated(n, 4, r, q)
    hi = enumerate_truncated(n, 40, r, q)
    assert 0 <= hi.value_mean - lo.value_mean <= lo.tail_bound_value
    assert 0 <= hi.left_count_mean - lo.left_count_mean <= lo.tail_bound_position


def test_truncation_level():
    M = truncation_level(7, Fraction(1, 2), 1e-12)
    res = enumerate_truncated(7, M, 1, Fraction(1, 2))
    assert res.tail_bound_value <= Fraction(1, 10**12)
    assert res.tail_bound_position <= Fraction(1, 10**12)


def test_brute_force_budget():
    with pytest.raises(DomainError):
        enumerate_brute(12, 10, 1, Fraction(1, 2))


@pytest.mark.parametrize("n", range(1, 9))
def test_permutation_maximum_position(n):
    e = permutation_enumerate(n, 1)
    assert e.position_mean == Fraction(n + 1, 2)
    assert e.left_count_mean == Fraction(n + 1, 2) - 1
    assert e.p_exists == 1


def test_permutation_second_record_n3():
    e = permutation_enumerate(3, 2)
    assert e.left_count_mean == Fraction(1, 6)
    assert e.position_mean == Fraction(5, 6)
    assert e.conditional_position == Fraction(5, 4)
    assert e.p_exists == Fraction(2, 3)


def test_permutation_budget():
    with pytest.raises(DomainError):
        permutation_enumerate(9, 1)


def test_monte_carlo_reproducible_across_workers():
    m = make_model("1/2")
    a = monte_carlo_multi("geometric", 200, (1, 2), 5000, seed=7, model=m, workers=1)
    b = monte_carlo_multi("geometric", 200, (1, 2), 5000, seed=7, model=m, workers=3)
    c = monte_carlo_multi("geometric", 200, (1, 2), 5000, seed=8, model=m, workers=1)
    assert a == b
    assert a != c


def test_monte_carlo_covers_exact_means():
    m = make_model("1/2")
    n = 30
    for r in (1, 2, 3):
        v, lc = monte_carlo("geometric", n, r, 40_000, seed=2024, model=m)
        assert v.covers(float(expected_value_exact(r, n, m).mean), widths=1.5)
        assert lc.covers(float(expected_position_exact(r, n, m).mean), widths=1.5)


def test_permutation_monte_carlo_small_n_matches_enumeration():
    for r in (1, 2):
        _, lc = monte_carlo("permutation", 6, r, 50_000, seed=5)
        assert lc.covers(float(permutation_enumerate(6, r).left_count_mean), widths=1.5)


def test_monte_carlo_arguments():
    with pytest.raises(DomainError):
        monte_carlo("geometric", 10, 1, 100, seed=1, model=make_model("1/2"))
    with pytest.raises(DomainError):
        monte_carlo("geometric", 10, 1, 1000, seed=1)
    with pytest.raises(DomainError):
        monte_carlo("other", 10, 1, 1000, seed=1)


def test_sample_permutations_rows_are_permutations():
    rows = sample_permutations(20, 50, seed=3)
    assert (np.sort(rows, axis=1) == np.arange(1, 21)).all()
