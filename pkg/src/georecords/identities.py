"""Exact-rational oracles for the coefficient-extraction identities.

Every generating function that appears in the record-height sums depends on a
height index h only through powers of X = q^h. We therefore expand in the
formal variable w with coefficients that are finite sums ``sum_e c_e X^e``
(:class:`QExpPoly`), and eliminate each sum over h analytically:

    sum_{h>=1} X^e     = q^e / (1 - q^e)
    sum_{h>=1} h X^e   = q^e / (1 - q^e)^2
    sum_{i>h}  X_i^e   = q^e / (1 - q^e) * X_h^e

No floating point is involved anywhere in this module.
"""

from __future__ import annotations

from fractions import Fraction
from itertools import combinations
from math import comb
from typing import Callable

from .qkernel import DomainError, QLike, parse_q

RationalQ = Fraction


def as_rational_q(q: QLike) -> Fraction:
    return parse_q(q)


class QExpPoly:
    """A finite sum ``sum_e c_e X^e`` with rational ``c_e`` and integer ``e``."""

    __slots__ = ("terms",)

    def __init__(self, terms=None):
        self.terms = {e: c for e, c in (terms or {}).items() if c}

    @classmethod
    def const(cls, c) -> "QExpPoly":
        return cls({0: Fraction(c)})

    @classmethod
    def mono(cls, c, e: int) -> "QExpPoly":
        return cls({e: Fraction(c)})

    def __add__(self, other):
        out = dict(self.terms)
        for e, c in other.terms.items():
            out[e] = out.get(e, 0) + c
        return QExpPoly(out)

    def __sub__(self, other):
        return self + other.scale(-1)

    def __mul__(self, other):
        if not isinstance(other, QExpPoly):
            return self.scale(other)
        out: dict = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                out[e1 + e2] = out.get(e1 + e2, 0) + c1 * c2
        return QExpPoly(out)

    __rmul__ = __mul__

    def scale(self, c) -> "QExpPoly":
        return QExpPoly({e: v * c for e, v in self.terms.items()})

    def __bool__(self):
        return bool(self.terms)

    def __repr__(self):
        return "QExpPoly(" + " + ".join(f"{c}*X^{e}" for e, c in sorted(self.terms.items())) + ")"

    def sum_over_heights(self, q: Fraction, weighted: bool = False) -> Fraction:
        """sum_{h>=1} (h if weighted else 1) * poly(q^h)."""
        total = Fraction(0)
        for e, c in self.terms.items():
            if e < 1:
                raise ValueError(f"divergent height sum: exponent {e}")
            qe = q**e
            total += c * qe / ((1 - qe) ** 2 if weighted else (1 - qe))
        return total

    def sum_above(self, q: Fraction) -> "QExpPoly":
        """Map f(X_i) to sum_{i > h} f(q^i) as a polynomial in X_h."""
        out = {}
        for e, c in self.terms.items():
            if e < 1:
                raise ValueError(f"divergent chain sum: exponent {e}")
            qe = q**e
            out[e] = c * qe / (1 - qe)
        return QExpPoly(out)


class PowerSeries:
    """Truncated power series sum_{i<=K} c_i w^i over a commutative ring.

    Coefficients may be ``Fraction`` or :class:`QExpPoly`; ``zero`` supplies
    the additive identity of the ring.
    """

    var = "w"

    def __init__(self, coeffs, order: int, zero=Fraction(0)):
        coeffs = list(coeffs)[: order + 1]
        coeffs += [zero] * (order + 1 - len(coeffs))
        self.coeffs = coeffs
        self.order = order
        self.zero = zero

    def _like(self, coeffs):
        return type(self)(coeffs, self.order, self.zero)

    def __getitem__(self, i: int):
        if i < 0 or i > self.order:
            return self.zero
        return self.coeffs[i]

    def __add__(self, other):
        return self._like([a + b for a, b in zip(self.coeffs, other.coeffs)])

    def __sub__(self, other):
        return self._like([a - b for a, b in zip(self.coeffs, other.coeffs)])

    def __mul__(self, other):
        if not isinstance(other, PowerSeries):
            return self._like([c * other for c in self.coeffs])
        K = self.order
        out = [self.zero] * (K + 1)
        for i, a in enumerate(self.coeffs):
            if not a:
                continue
            for j in range(K + 1 - i):
                b = other.coeffs[j]
                if b:
                    out[i + j] = out[i + j] + a * b
        return self._like(out)

    __rmul__ = __mul__

    def shift(self, s: int):
        """Multiply by var^s."""
        return self._like([self.zero] * s + self.coeffs[: self.order + 1 - s])

    def map(self, fn: Callable):
        return type(self)([fn(c) for c in self.coeffs], self.order, self.zero)

    def inverse(self):
        """Reciprocal of a series with unit constant term (Fraction coefficients)."""
        c0 = self.coeffs[0]
        if not c0:
            raise ZeroDivisionError("constant term is zero")
        out = [Fraction(0)] * (self.order + 1)
        out[0] = 1 / c0
        for n in range(1, self.order + 1):
            acc = sum(self.coeffs[i] * out[n - i] for i in range(1, n + 1))
            out[n] = -acc / c0
        return self._like(out)

    def __repr__(self):
        return f"{type(self).__name__}({self.coeffs!r}, order={self.order})"


class XPolynomial(PowerSeries):
    """Polynomial in the formal variable x, truncated above degree ``order``."""

    var = "x"

    @classmethod
    def linear(cls, a, b, degree: int) -> "XPolynomial":
        """a + b x."""
        return cls([Fraction(a), Fraction(b)], degree)


def _geometric(c: Fraction, e: int, K: int, power: int = 1) -> PowerSeries:
    """1/(1 - c X^e w)^power expanded in w with QExpPoly coefficients."""
    coeffs = [
        QExpPoly.mono(comb(a + power - 1, power - 1) * c**a, e * a) for a in range(K + 1)
    ]
    return PowerSeries(coeffs, K, QExpPoly())


def _wX_power(s: int, K: int, c=1) -> PowerSeries:
    """c (w X)^s."""
    if s > K:
        return PowerSeries([QExpPoly()] * (K + 1), K, QExpPoly())
    coeffs = [QExpPoly()] * (K + 1)
    coeffs[s] = QExpPoly.mono(c, s)
    return PowerSeries(coeffs, K, QExpPoly())


def extract_helper_coefficient(n: int, m: int, q: QLike) -> Fraction:
    """[w^n] sum_h h w q^h (w q^h)^m / ((1 - w q^(h-1)) (1 - w q^h)), exactly."""
    if not (n >= m >= 0 and n >= 1):
        raise DomainError(f"need n >= m >= 0 and n >= 1, got n={n}, m={m}")
    q = as_rational_q(q)
    K = n
    series = _wX_power(1 + m, K) * _geometric(1 / q, 1, K) * _geometric(Fraction(1), 1, K)
    return series[n].sum_over_heights(q, weighted=True)


def helper_closed_form(n: int, m: int, q: QLike) -> Fraction:
    q = as_rational_q(q)
    p = 1 - q
    return (q / p) * (q**m - q**n) / (1 - q**n) ** 2


def _position_kernel(K: int, q: Fraction, power: int) -> PowerSeries:
    # (w X)^power * w (1 - X/q) / ((1 - w X/q)^2 (1 - w X))
    one_minus = PowerSeries(
        [QExpPoly(), QExpPoly({0: Fraction(1), 1: -1 / q})], K, QExpPoly()
    )
    return _wX_power(power, K) * one_minus * _geometric(1 / q, 1, K, power=2) * _geometric(
        Fraction(1), 1, K
    )


def extract_tau_coefficient(k: int, m: int, q: QLike) -> Fraction:
    """[w^k] sum_h (w q^h)^(m+1) w (1 - q^(h-1)) / ((1 - w q^(h-1))^2 (1 - w q^h)).

    The exponent is m+1 so that m is the index of the last chain element, as
    in tau(k, l_{r-1}); m = 0 is the single-record case.
    """
    if k < 2 or m < 0:
        raise DomainError(f"need k >= 2 and m >= 0, got k={k}, m={m}")
    q = as_rational_q(q)
    series = _position_kernel(k, q, m + 1)
    return series[k].sum_over_heights(q)


def tau_rational(k: int, m: int, q: QLike, form: str = "Q") -> Fraction:
    """Closed form of tau(k, m) in exact arithmetic.

    ``form="Q"`` uses the 1/(Q^j - 1) denominators with final coefficient
    q/p^2; ``form="p"`` is the variant written with 1/(1 - q^j) denominators
    whose final coefficient is q^2/p^2.
    """
    if k < 2:
        raise DomainError("tau has poles at k in {0, 1}")
    q = as_rational_q(q)
    p = 1 - q
    Q = 1 / q
    a = k - m - 1
    if form == "Q":
        u1, u0 = 1 / (Q ** (k - 1) - 1), 1 / (Q**k - 1)
        return (
            -(q ** (m + 2)) / p**2 * u1
            + q ** (m + 1) / p * u1 * a
            + q**2 / p**2 * u1
            + q ** (m + 2) / p**2 * u0
            - q ** (m + 1) / p * u0 * a
            - q / p**2 * u0
        )
    if form == "p":
        v1, v0 = 1 / (1 - q ** (k - 1)), 1 / (1 - q**k)
        return (
            -(q ** (m + 2)) / p**2 * v1
            + q ** (m + 1) / p * v1 * a
            + q**2 / p**2 / (Q ** (k - 1) - 1)
            + q ** (m + 2) / p**2 * v0
            - q ** (m + 1) / p * v0 * a
            - q**2 / p**2 / (Q**k - 1)
        )
    raise ValueError(f"unknown tau form {form!r}")


def chain_sum_direct(s: int, j: int, q: QLike) -> Fraction:
    """sum over 0 < i_1 < ... < i_s < j of prod 1/(Q^i - 1), by enumeration."""
    q = as_rational_q(q)
    Q = 1 / q
    total = Fraction(0)
    for chain in combinations(range(1, j), s):
        t = Fraction(1)
        for i in chain:
            t /= Q**i - 1
        total += t
    return total


def poch_x(q: Fraction, start_power: int, n: int, degree: int) -> XPolynomial:
    """((1-x) q^start_power; q)_n as a polynomial in x."""
    out = XPolynomial([Fraction(1)], degree)
    for i in range(n):
        c = q ** (start_power + i)
        out = out * XPolynomial.linear(1 - c, c, degree)
    return out


def q_factorial(q: Fraction, n: int) -> Fraction:
    out = Fraction(1)
    for i in range(1, n + 1):
        out *= 1 - q**i
    return out


def chain_sum_xform(s: int, j: int, q: QLike) -> Fraction:
    """[x^s] ((1-x)q; q)_{j-1} / (q; q)_{j-1}."""
    q = as_rational_q(q)
    return poch_x(q, 1, j - 1, s)[s] / q_factorial(q, j - 1)


def phi_direct(r: int, k: int, q: QLike) -> Fraction:
    """phi_r(k) from its defining nested sum; r = 1 uses the empty chain (q^{l_0} = 1)."""
    if r < 1 or k < 0:
        raise DomainError("need r >= 1 and k >= 0")
    q = as_rational_q(q)
    Q = 1 / q
    if r == 1:
        return 1 - q**k
    total = Fraction(0)
    for chain in combinations(range(1, k), r - 1):
        t = Fraction(1)
        for l in chain:
            t /= Q**l - 1
        total += t * (q ** chain[-1] - q**k)
    return total


def phi_xform(r: int, k: int, q: QLike, displayed: bool = False) -> Fraction:
    """phi_r(k) from the q-binomial x-coefficient form.

    phi_r(k) = -[x^(r-1)] ( (q^k - 1) ((1-x)q;q)_k/(q;q)_k
                            + x q (1-q^k)/(1 - (1-x) q^(k+1)) ((1-x)q^2;q)_k/(q;q)_k )

    The Kronecker term that makes the derivation vanish at r = 1 is omitted,
    which yields the empty-chain value 1 - q^k there. ``displayed=True``
    replaces q^(k+1) in the middle denominator by q, reproducing the form
    that is printed without the k-dependence (it fails for r >= 2, k >= 1).
    """
    if r < 1 or k < 0:
        raise DomainError("need r >= 1 and k >= 0")
    q = as_rational_q(q)
    p = 1 - q
    d = r - 1
    qk = q**k
    fact = q_factorial(q, k)
    A = poch_x(q, 1, k, d) * (1 / fact)
    B = poch_x(q, 2, k, d) * (1 / fact)
    e = q if displayed else q ** (k + 1)
    # x q / (1 - (1-x) e) = x q / ((1-e)(1 + x e/(1-e)))
    K = XPolynomial.linear(1, e / (1 - e), d).inverse() * (q / (1 - e))
    K = K.shift(1)
    expr = A * (qk - 1) + K * B * (1 - qk)
    return -expr[d]


def phi_forms_check(r: int, k: int, q: QLike) -> tuple[Fraction, Fraction]:
    return phi_direct(r, k, q), phi_xform(r, k, q)


def _chain_suffix(r: int, K: int, q: Fraction) -> PowerSeries:
    """sum_{h < i_1 < ... < i_{r-1}} prod w X_i/(1 - w X_i), as a series in w over X_h."""
    T = PowerSeries([QExpPoly.const(1)], K, QExpPoly())
    step = _wX_power(1, K) * _geometric(Fraction(1), 1, K)
    for _ in range(r - 1):
        T = (step * T).map(lambda c: c.sum_above(q))
    return T


def extract_value_inner_sum(r: int, k: int, q: QLike) -> Fraction:
    """[w^k] sum_{1<=h<i_1<...<i_{r-1}} h w q^h/((1-wq^(h-1))(1-wq^h)) prod q^i w/(1-q^i w)."""
    if r < 1:
        raise DomainError("r must be >= 1")
    if r > k:
        return Fraction(0)
    q = as_rational_q(q)
    outer = _wX_power(1, k) * _geometric(1 / q, 1, k) * _geometric(Fraction(1), 1, k)
    series = outer * _chain_suffix(r, k, q)
    return series[k].sum_over_heights(q, weighted=True)


def extract_position_inner_sum(r: int, k: int, q: QLike) -> Fraction:
    """[w^k] sum_{1<=h<i_1<...} w q^h w(1-q^(h-1))/((1-wq^(h-1))^2(1-wq^h)) prod q^i w/(1-q^i w)."""
    if r < 1:
        raise DomainError("r must be >= 1")
    q = as_rational_q(q)
    if k < 2:
        return Fraction(0)
    series = _position_kernel(k, q, 1) * _chain_suffix(r, k, q)
    return series[k].sum_over_heights(q)


def psi_rational(r: int, k: int, q: QLike, form: str = "Q") -> Fraction:
    """psi_r(k) = sum over 0<l_1<...<l_{r-1}<k-1 of prod 1/(Q^l-1) * tau(k, l_{r-1})."""
    q = as_rational_q(q)
    Q = 1 / q
    if r == 1:
        return tau_rational(k, 0, q, form)
    total = Fraction(0)
    for chain in combinations(range(1, k - 1), r - 1):
        t = Fraction(1)
        for l in chain:
            t /= Q**l - 1
        total += t * tau_rational(k, chain[-1], q, form)
    return total


def tau_form_verdict(q_grid=("1/2", "1/3", "2/3"), k_max: int = 10) -> dict:
    """Compare both printed tau forms with the extraction oracle.

    Returns ``{form: list of (k, m, q) mismatches}``.
    """
    out = {"Q": [], "p": []}
    for qs in q_grid:
        q = as_rational_q(qs)
        for k in range(2, k_max + 1):
            for m in range(0, k - 1):
                oracle = extract_tau_coefficient(k, m, q)
                for form in out:
                    if tau_rational(k, m, q, form) != oracle:
                        out[form].append((k, m, str(q)))
    return out
