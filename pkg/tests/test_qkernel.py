from fractions import Fraction

import mpmath
import pytest
from hypothesis import given, strategies as st
from mpmath import mp, mpf

from georecords.qkernel import (
    BoundedValue,
    DomainError,
    PrecisionContext,
    make_model,
    math_constants,
    parse_q,
    q_harmonic_sums,
    q_pochhammer_finite,
    q_pochhammer_infinite,
    to_mpf,
)


@pytest.mark.parametrize(
    "text,expected",
    [("1/2", Fraction(1, 2)), ("0.25", Fraction(1, 4)), (" 2/3 ", Fraction(2, 3)),
     (0.5, Fraction(1, 2)), (Fraction(3, 7), Fraction(3, 7)), ("0.999", Fraction(999, 1000))],
)
def test_parse_q_accepts_decimals_and_ratios(text, expected):
    assert parse_q(text) == expected


@pytest.mark.parametrize("bad", ["5/3", "0", "1", "-0.5", "abc", "1/0", float("nan"), 2])
def test_parse_q_rejects_outside_unit_interval(bad):
    with pytest.raises(DomainError):
        parse_q(bad)


def test_precision_context_validation():
    with pytest.raises(DomainError):
        PrecisionContext(bits=32)
    with pytest.raises(DomainError):
        PrecisionContext(bits=64, series_tol=1e-30)
    ctx = PrecisionContext(bits=256, series_tol=1e-60)
    assert ctx.with_bits(512).bits == 512


def test_model_fields():
    m = make_model("1/3")
    assert m.p_exact == Fraction(2, 3)
    with mp.workprec(m.bits):
        assert m.Q == 3
        assert abs(m.L - mpmath.log(3)) < mpf(2) ** (-120)
    assert m.at(300).bits == 300 and m.at(300).q_exact == m.q_exact


def test_finite_pochhammer_matches_product():
    m = make_model("1/2")
    with mp.workprec(128):
        direct = (1 - mpf("0.3")) * (1 - mpf("0.15")) * (1 - mpf("0.075"))
        assert abs(q_pochhammer_finite(mpf("0.3"), 3, m) - direct) < mpf(10) ** -35
    assert q_pochhammer_finite(5, 0, m) == 1


@pytest.mark.parametrize("q", ["1/2", "9/10", "99/100"])
@pytest.mark.parametrize("a", ["0.5", "-0.7", "1", "1.5"])
def test_infinite_pochhammer_against_mpmath_qp(q, a):
    ctx = PrecisionContext()
    m = make_model(q, ctx)
    if float(a) * float(Fraction(q)) >= 1:
        pytest.skip("outside |a| < Q")
    a = to_mpf(Fraction(a))  # a float-exact argument shared by both routes
    bv = q_pochhammer_infinite(a, m, ctx)
    with mp.workprec(1200):
        # Euler: (a;q)_inf = sum_n (-1)^n q^(n(n-1)/2) a^n / (q;q)_n
        qq, aa = to_mpf(Fraction(q)), a
        ref, term, n = mpf(0), mpf(1), 0
        while abs(term) > mpf(10) ** -60 or n < 10:
            ref += term
            n += 1
            term *= -aa * qq ** (n - 1) / (1 - qq**n)
        assert abs(bv.estimate - ref) <= bv.err + mpf(10) ** -34
    assert bv.err <= 1e-29 * max(1, abs(bv.estimate))


def test_infinite_pochhammer_rejects_large_argument():
    m = make_model("1/2")
    with pytest.raises(DomainError):
        q_pochhammer_infinite(3, m, PrecisionContext())


@pytest.mark.parametrize("q", ["1/2", "9/10"])
def test_harmonic_sums_against_nsum(q):
    ctx = PrecisionContext()
    m = make_model(q, ctx)
    s1, s2 = q_harmonic_sums(m, ctx)
    with mp.workprec(160):
        Q = to_mpf(1 / Fraction(q))
        r1 = mpmath.nsum(lambda l: 1 / (Q**l - 1), [1, mpmath.inf])
        r2 = mpmath.nsum(lambda l: l * Q**l / (Q**l - 1) ** 2, [1, mpmath.inf])
    assert abs(s1.estimate - r1) <= s1.err + mpf(10) ** -28
    assert abs(s2.estimate - r2) <= s2.err + mpf(10) ** -26
    assert s1.err <= ctx.series_tol and s2.err <= ctx.series_tol


def test_harmonic_sum_first_terms_q_half():
    # sum 1/(2^l - 1) = 1.6066951524152917637833015231909245804805796715057...
    m = make_model("1/2")
    s1, _ = q_harmonic_sums(m, PrecisionContext())
    assert s1.contains("1.6066951524152917637833015231909245804805796715057")


def test_math_constants_digits():
    c = math_constants(PrecisionContext(), (2, 3, 4, 6))
    with mp.workprec(128):
        assert abs(c.gamma - mpf("0.5772156649015328606065120900824")) < mpf(10) ** -30
        assert abs(c.zeta(2) - mpmath.pi**2 / 6) < mpf(10) ** -35
    with pytest.raises(DomainError):
        c.zeta(5)


@pytest.mark.parametrize("s", [1, 0, -2])
def test_math_constants_reject_divergent(s):
    with pytest.raises(DomainError):
        math_constants(PrecisionContext(), (s,))


def test_bounded_value():
    bv = BoundedValue(mpf(1), mpf("0.1"))
    assert bv.contains(mpf("1.05")) and not bv.contains(2)
    assert bv.agrees_with(BoundedValue(mpf("1.15"), mpf("0.06")))
    with pytest.raises(ValueError):
        BoundedValue(mpf(0), mpf(-1))


@given(st.integers(1, 999), st.integers(2, 1000))
def test_parse_q_roundtrip(a, b):
    if a >= b:
        return
    assert parse_q(f"{a}/{b}") == Fraction(a, b)


@given(st.floats(0.01, 0.99))
def test_pochhammer_infinite_positive_and_below_one(qf):
    ctx = PrecisionContext()
    m = make_model(qf, ctx)
    bv = q_pochhammer_infinite(m.q, m, ctx)
    assert 0 < bv.estimate < 1
