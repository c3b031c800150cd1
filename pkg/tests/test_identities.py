from fractions import Fraction

import pytest
from hypothesis import given, strategies as st
from mpmath import mp, mpf

from georecords import identities as ident
from georecords.qkernel import DomainError

Q_GRID = ("1/2", "1/3", "2/3")

rational_q = st.builds(Fraction, st.integers(1, 9), st.integers(2, 10)).filter(lambda q: 0 < q < 1)


# -- independent numeric route: expand each height's rational function in w
#    with mpmath, then sum over h directly.


def _series_mul(a, b, K):
    return [sum(a[i] * b[j - i] for i in range(j + 1)) for j in range(K + 1)]


def _geo(c, K, power=1):
    out = [mpf(1)] + [mpf(0)] * K
    base = [c**i for i in range(K + 1)]
    for _ in range(power):
        out = _series_mul(out, base, K)
    return out


def _height_sum(coef_at_height, H=400):
    return sum(coef_at_height(h) for h in range(1, H + 1))


def _helper_numeric(n, m, q):
    def at(h):
        X = q**h
        s = _series_mul(_geo(X / q, n), _geo(X, n), n)
        return h * X ** (m + 1) * s[n - m - 1] if n - m - 1 >= 0 else mpf(0)
    return _height_sum(at)


def _tau_numeric(k, m, q):
    def at(h):
        X = q**h
        s = _series_mul(_geo(X / q, k, power=2), _geo(X, k), k)
        j = k - m - 2
        return X ** (m + 1) * (1 - X / q) * s[j] if j >= 0 else mpf(0)
    return _height_sum(at)


@pytest.mark.parametrize("n,m", [(1, 0), (3, 1), (5, 5), (6, 2)])
def test_helper_extraction_matches_numeric_height_sum(n, m):
    with mp.workprec(150):
        q = mpf(1) / 2
        num = _helper_numeric(n, m, q)
        ex = ident.extract_helper_coefficient(n, m, "1/2")
        assert abs(num - mpf(ex.numerator) / ex.denominator) < mpf(10) ** -35


@pytest.mark.parametrize("k,m", [(2, 0), (4, 1), (6, 3), (7, 0)])
def test_tau_extraction_matches_numeric_height_sum(k, m):
    with mp.workprec(150):
        q = mpf(1) / 3
        num = _tau_numeric(k, m, q)
        ex = ident.extract_tau_coefficient(k, m, "1/3")
        assert abs(num - mpf(ex.numerator) / ex.denominator) < mpf(10) ** -35


def test_helper_frozen_values():
    # (q/p)(q^m - q^n)/(1-q^n)^2 at q = 1/2: n=2, m=1 -> 4/9; n=3, m=0 -> 8/7
    assert ident.extract_helper_coefficient(2, 1, "1/2") == Fraction(4, 9)
    assert ident.extract_helper_coefficient(3, 0, "1/2") == Fraction(8, 7)
    assert ident.extract_helper_coefficient(4, 4, "1/3") == 0


@pytest.mark.parametrize("q", Q_GRID)
def test_helper_lemma_grid(q):
    for n in range(1, 13):
        for m in range(0, n + 1):
            assert ident.extract_helper_coefficient(n, m, q) == ident.helper_closed_form(n, m, q)


@pytest.mark.parametrize("q", Q_GRID)
def test_tau_closed_form_with_Q_denominators(q):
    for k in range(2, 11):
        for m in range(0, k - 1):
            assert ident.extract_tau_coefficient(k, m, q) == ident.tau_rational(k, m, q, "Q")
        assert ident.tau_rational(k, k - 1, q) == 0


def test_tau_variant_with_one_minus_q_denominators_is_refuted():
    verdict = ident.tau_form_verdict(Q_GRID, 6)
    assert verdict["Q"] == []
    assert len(verdict["p"]) == 3 * sum(k - 1 for k in range(2, 7))


def test_tau_rejects_poles():
    with pytest.raises(DomainError):
        ident.tau_rational(1, 0, "1/2")
    with pytest.raises(ValueError):
        ident.tau_rational(3, 0, "1/2", form="z")


@pytest.mark.parametrize("q", Q_GRID)
def test_phi_direct_equals_xform(q):
    for r in range(1, 5):
        for k in range(0, 11):
            a, b = ident.phi_forms_check(r, k, q)
            assert a == b, (r, k)


def test_phi_xform_constant_denominator_fails_from_r2():
    assert ident.phi_xform(1, 5, "1/2", displayed=True) == ident.phi_direct(1, 5, "1/2")
    assert ident.phi_xform(2, 1, "1/2", displayed=True) != ident.phi_direct(2, 1, "1/2")


def test_phi_small_values():
    # phi_1(k) = 1 - q^k (empty chain); phi_2(2) = (q - q^2)/(Q - 1)
    assert ident.phi_direct(1, 3, "1/2") == Fraction(7, 8)
    assert ident.phi_direct(2, 2, "1/2") == Fraction(1, 4)
    assert ident.phi_direct(3, 2, "1/2") == 0


@pytest.mark.parametrize("q", Q_GRID)
def test_chain_identity(q):
    for s in range(0, 4):
        for j in range(1, 11):
            assert ident.chain_sum_direct(s, j, q) == ident.chain_sum_xform(s, j, q)


@pytest.mark.parametrize("q", Q_GRID)
def test_value_inner_sum(q):
    qf = Fraction(q)
    p = 1 - qf
    for r in range(1, 4):
        for k in range(1, 9):
            expected = qf / p * ident.phi_direct(r, k, q) / (1 - qf**k) ** 2 if k >= r else 0
            assert ident.extract_value_inner_sum(r, k, q) == expected


@pytest.mark.parametrize("q", Q_GRID)
def test_position_inner_sum(q):
    for r in range(1, 4):
        for k in range(r + 1, 9):
            assert ident.extract_position_inner_sum(r, k, q) == ident.psi_rational(r, k, q)


def test_qexppoly_height_sums():
    poly = ident.QExpPoly({1: Fraction(2), 3: Fraction(-1)})
    q = Fraction(1, 2)
    assert poly.sum_over_heights(q) == 2 * q / (1 - q) - q**3 / (1 - q**3)
    assert poly.sum_over_heights(q, weighted=True) == 2 * q / (1 - q) ** 2 - q**3 / (1 - q**3) ** 2
    assert poly.sum_above(q).terms == {1: 2 * q / (1 - q), 3: -(q**3) / (1 - q**3)}
    with pytest.raises(ValueError):
        ident.QExpPoly.const(1).sum_over_heights(q)


@given(st.lists(st.fractions(min_value=-5, max_value=5, max_denominator=7), min_size=1, max_size=6))
def test_series_inverse_roundtrip(coeffs):
    s = ident.PowerSeries([Fraction(1)] + coeffs, 6)
    prod = s * s.inverse()
    assert prod.coeffs == [Fraction(1)] + [Fraction(0)] * 6


@given(rational_q, st.integers(1, 8), st.data())
def test_helper_lemma_property(q, n, data):
    m = data.draw(st.integers(0, n))
    assert ident.extract_helper_coefficient(n, m, q) == ident.helper_closed_form(n, m, q)


@given(rational_q, st.integers(2, 7), st.data())
def test_tau_property(q, k, data):
    m = data.draw(st.integers(0, k - 2))
    assert ident.extract_tau_coefficient(k, m, q) == ident.tau_rational(k, m, q)


@given(rational_q, st.integers(1, 12))
def test_tau_vanishes_one_below_diagonal(q, k):
    if k >= 2:
        assert ident.tau_rational(k, k - 1, q) == 0


@given(rational_q, st.integers(0, 3), st.integers(1, 8))
def test_chain_identity_property(q, s, j):
    assert ident.chain_sum_direct(s, j, q) == ident.chain_sum_xform(s, j, q)


@given(rational_q, st.integers(1, 4), st.integers(0, 8))
def test_phi_forms_property(q, r, k):
    a, b = ident.phi_forms_check(r, k, q)
    assert a == b
