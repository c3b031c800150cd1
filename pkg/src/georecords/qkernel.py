"""Precision contexts, the geometric letter model, q-Pochhammer symbols and
convergent q-series with rigorous truncation bounds.

All real arithmetic goes through :mod:`mpmath`. Every function sets its own
working precision with ``mp.workprec`` so callers never have to touch the
global mpmath context.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Union

import mpmath
from mpmath import mp, mpf

QLike = Union[str, Fraction, float, int]

# Published digits used to cross-check the computed constants.
PUBLISHED_DIGITS = {
    "gamma": "0.577215664901532860606512090082",
    2: "1.644934066848226436472415166646",
    3: "1.202056903159594285399738161511",
    4: "1.082323233711138191516003696541",
    6: "1.017343061984449139714517929790",
}


class DomainError(ValueError):
    """An argument lies outside the domain of an operation."""


@dataclass(frozen=True)
class PrecisionContext:
    """Working mantissa bits plus the absolute tail target for infinite series."""

    bits: int = 128
    series_tol: float = 1e-30

    def __post_init__(self):
        if self.bits < 64:
            raise DomainError(f"bits must be >= 64, got {self.bits}")
        if not self.series_tol > 0:
            raise DomainError("series_tol must be positive")
        if self.series_tol < 2.0 ** (-self.bits + 8):
            raise DomainError(
                f"series_tol={self.series_tol} is below 2^(-bits+8) for bits={self.bits}"
            )

    def with_bits(self, bits: int) -> "PrecisionContext":
        return PrecisionContext(bits=bits, series_tol=max(self.series_tol, 2.0 ** (-bits + 8)))

    @property
    def eps(self) -> mpf:
        return mpf(2) ** (-self.bits)


@dataclass(frozen=True)
class BoundedValue:
    """An estimate together with an absolute error bound."""

    estimate: mpf
    err: mpf = field(default_factory=lambda: mpf(0))

    def __post_init__(self):
        if self.err < 0:
            raise ValueError("error bound must be non-negative")

    def contains(self, x) -> bool:
        with mp.workprec(max(mp.prec, 256)):
            x = to_mpf(x) if not isinstance(x, str) else mpf(x)
            return abs(mpmath.fsub(x, self.estimate, exact=True)) <= self.err

    def agrees_with(self, other: "BoundedValue") -> bool:
        diff = mpmath.fsub(self.estimate, other.estimate, exact=True)
        return abs(diff) <= mpmath.fadd(self.err, other.err, exact=True)

    def __float__(self):
        return float(self.estimate)

    def __str__(self):
        return f"{mpmath.nstr(self.estimate, 15)} ± {mpmath.nstr(self.err, 3)}"


def to_mpf(x) -> mpf:
    """Convert an int, float, Fraction or mpf to mpf at the current precision."""
    if isinstance(x, Fraction):
        return mpf(x.numerator) / x.denominator
    return mpf(x)


def parse_q(value: QLike) -> Fraction:
    """Turn ``"a/b"``, a decimal string, a float or a Fraction into an exact ratio in (0, 1)."""
    try:
        if isinstance(value, Fraction):
            q = value
        elif isinstance(value, float):
            if not math.isfinite(value):
                raise DomainError(f"q must be finite, got {value}")
            q = Fraction(repr(value))
        else:
            q = Fraction(str(value).strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise DomainError(f"cannot parse q={value!r}") from exc
    if not 0 < q < 1:
        raise DomainError(f"q must lie strictly between 0 and 1, got {value!r}")
    return q


@dataclass(frozen=True)
class GeomModel:
    """Letter distribution P{X=k} = p q^(k-1), k >= 1.

    ``q_exact`` is the authoritative value; ``q, p, Q, L`` are mpf numbers
    rounded at ``bits``. Use :meth:`at` to obtain the same model at another
    precision.
    """

    q_exact: Fraction
    bits: int
    q: mpf
    p: mpf
    Q: mpf
    L: mpf

    @property
    def p_exact(self) -> Fraction:
        return 1 - self.q_exact

    def at(self, bits: int) -> "GeomModel":
        if bits == self.bits:
            return self
        return _build_model(self.q_exact, bits)

    def __repr__(self):
        return f"GeomModel(q={self.q_exact}, bits={self.bits})"


def _build_model(q_exact: Fraction, bits: int) -> GeomModel:
    with mp.workprec(bits):
        q = mpf(q_exact.numerator) / q_exact.denominator
        p = mpf(q_exact.denominator - q_exact.numerator) / q_exact.denominator
        Q = mpf(q_exact.denominator) / q_exact.numerator
        L = mpmath.log(Q)
    return GeomModel(q_exact, bits, q, p, Q, L)


def make_model(q: QLike, ctx: PrecisionContext = PrecisionContext()) -> GeomModel:
    """Build the model for letter parameter ``q``.

    >>> m = make_model("1/3")
    >>> m.p_exact, int(m.Q)
    (Fraction(2, 3), 3)
    """
    return _build_model(parse_q(q), ctx.bits)


def q_pochhammer_finite(a, n: int, model: GeomModel) -> mpf:
    """(a; q)_n = (1-a)(1-aq)...(1-aq^(n-1)), evaluated at the model's precision."""
    if n < 0:
        raise DomainError("n must be non-negative")
    with mp.workprec(model.bits):
        a = mpf(a)
        out = mpf(1)
        t = a
        for _ in range(n):
            out *= 1 - t
            t *= model.q
        return +out


def q_pochhammer_infinite(a, model: GeomModel, ctx: PrecisionContext) -> BoundedValue:
    """(a; q)_inf with an absolute error bound.

    Truncation after N factors leaves T = prod_{i>=N} (1 - a q^i). With
    s = |a| q^N / p <= 1/2 every remaining factor has |a q^i| <= 1/2, hence
    |log T| <= 2 s and |T - 1| <= exp(2 s) - 1.
    """
    with mp.workprec(ctx.bits + 16):
        a = mpf(a)
        q, p = model.at(ctx.bits + 16).q, model.at(ctx.bits + 16).p
        if not abs(a) < 1 / q:
            raise DomainError(f"|a| must be < Q for (a;q)_inf, got a={a}")
        if a == 0:
            return BoundedValue(mpf(1), mpf(0))
        tol = mpf(ctx.series_tol)
        prod = mpf(1)
        t = a
        n = 0
        while True:
            s = abs(t) / p
            if s <= 0.5:
                tail_rel = mpmath.expm1(2 * s)
                if abs(prod) * tail_rel * 2 <= tol:
                    break
            prod *= 1 - t
            t *= q
            n += 1
        err = abs(prod) * tail_rel * (1 + tail_rel) + abs(prod) * (n + 2) * mpf(2) ** (-ctx.bits)
        return BoundedValue(+prod, err)


def q_harmonic_sums(model: GeomModel, ctx: PrecisionContext) -> tuple[BoundedValue, BoundedValue]:
    """Return (sum_l 1/(Q^l - 1), sum_l l Q^l/(Q^l - 1)^2), l >= 1.

    The tails past N are bounded by

        sum_{l>N} q^l/(1-q^l)       <= q^(N+1) / ((1-q)(1-q^(N+1)))
        sum_{l>N} l q^l/(1-q^l)^2   <= q^(N+1)((N+1) - N q) / ((1-q)^2 (1-q^(N+1))^2)
    """
    bits = ctx.bits + 16
    m = model.at(bits)
    with mp.workprec(bits):
        q = m.q
        tol = mpf(ctx.series_tol)
        s1 = mpf(0)
        s2 = mpf(0)
        ql = mpf(1)
        l = 0
        while True:
            l += 1
            ql *= q
            d = 1 - ql
            s1 += ql / d
            s2 += l * ql / (d * d)
            qn = ql * q
            dn = 1 - qn
            t1 = qn / ((1 - q) * dn)
            t2 = qn * ((l + 1) - l * q) / ((1 - q) ** 2 * dn * dn)
            if t1 <= tol / 2 and t2 <= tol / 2:
                break
        rnd = mpf(2) ** (-ctx.bits) * (l + 4)
        return (
            BoundedValue(+s1, t1 + rnd * s1),
            BoundedValue(+s2, t2 + rnd * s2),
        )


@dataclass(frozen=True)
class MathConstants:
    gamma: mpf
    zeta_values: dict
    bits: int

    def zeta(self, s: int) -> mpf:
        try:
            return self.zeta_values[s]
        except KeyError:
            raise DomainError(f"zeta({s}) was not requested from math_constants") from None


def math_constants(ctx: PrecisionContext, s_set: Iterable[int] = (2, 3, 4, 5, 6)) -> MathConstants:
    """Euler's gamma and zeta(s) for integer s >= 2 at ``ctx.bits``.

    Values come from mpmath and are compared with 30 published digits on
    every call; a mismatch raises ``RuntimeError``.
    """
    s_set = sorted(set(int(s) for s in s_set))
    for s in s_set:
        if s <= 1:
            raise DomainError(f"zeta({s}) diverges or is out of range; need s >= 2")
    with mp.workprec(ctx.bits):
        gamma = +mpmath.euler
        zetas = {s: mpmath.zeta(s) for s in s_set}
    with mp.workprec(110):
        checks = [("gamma", gamma)] + [(s, zetas[s]) for s in s_set if s in PUBLISHED_DIGITS]
        for key, val in checks:
            ref = mpf(PUBLISHED_DIGITS[key])
            if abs(val - ref) > mpf(10) ** -29:
                raise RuntimeError(f"constant {key} disagrees with published digits")
    return MathConstants(gamma, zetas, ctx.bits)
