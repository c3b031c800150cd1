"""Exact finite-n expectations for the r-th left-to-right maximum from the right.

Both statistics are alternating binomial sums

    E_value(r, n)    = (-1)^r (p/q)^(r-1) sum_{k=r}^n   C(n,k) (-1)^k phi_r(k) / (1-q^k)^2
    E_leftcount(r,n) = (-1)^(r-1) (p/q)^r sum_{k=r+1}^n C(n,k) (-1)^k psi_r(k)

whose terms grow like 2^n while the result is O(log n) or O(n). They are
evaluated at n + guard bits with exact integer binomials; the result is then
recomputed with 32 more guard bits and accepted only if both agree to 2^-64
relative to max(1, |result|).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import mpmath
from mpmath import mp, mpf

from .qkernel import DomainError, GeomModel, PrecisionContext

GUARD_BITS = 64
MAX_N = 2**14


class PoleError(DomainError):
    """Evaluation requested at a pole of a closed form."""


@dataclass(frozen=True)
class AltSumSpec:
    """sum_{k=k_start}^n C(n,k) (-1)^k term(k).

    ``term`` is called under the working precision chosen by
    :func:`alternating_sum` and must compute at that precision.
    """

    n: int
    k_start: int
    term: Callable[[int], mpf]
    guard_bits: int = GUARD_BITS

    def __post_init__(self):
        if self.k_start < 0:
            raise DomainError("k_start must be >= 0")


@dataclass(frozen=True)
class ExactMean:
    r: int
    n: int
    kind: str  # "value" or "leftCount"
    mean: mpf
    precision_bits: int

    @property
    def position(self) -> mpf:
        """Left count plus one.

        This is the mean 1-based position only when every word has r records
        (r = 1); for r >= 2 the indicator convention makes it differ by
        1 - P(r records exist).
        """
        if self.kind != "leftCount":
            raise AttributeError("position is only defined for leftCount means")
        return self.mean + 1

    def __float__(self):
        return float(self.mean)


def _sum_at(spec: AltSumSpec, bits: int) -> mpf:
    with mp.workprec(bits):
        n = spec.n
        total = mpf(0)
        if spec.k_start > n:
            return total
        binom = math.comb(n, spec.k_start)
        for k in range(spec.k_start, n + 1):
            try:
                t = spec.term(k)
            except ZeroDivisionError as exc:
                raise ArithmeticError(f"term evaluation failed at k={k}") from exc
            if k % 2:
                total -= binom * t
            else:
                total += binom * t
            binom = binom * (n - k) // (k + 1)
        return total


def alternating_sum(spec: AltSumSpec, out_bits: int = 128) -> mpf:
    """Evaluate the alternating binomial sum with a precision self-check."""
    guard = spec.guard_bits
    for _ in range(6):
        base = spec.n + guard + 2 * int(math.log2(spec.n + 2)) + 8
        s1 = _sum_at(spec, base)
        s2 = _sum_at(spec, base + 32)
        with mp.workprec(base + 32):
            scale = max(mpf(1), abs(s2))
            if abs(s1 - s2) <= scale * mpf(2) ** -GUARD_BITS:
                with mp.workprec(out_bits):
                    return +s2
        guard *= 2
    raise ArithmeticError("alternating sum did not stabilise")


class _Tables:
    """Prefix quantities for phi_r and psi_r at the current mp precision.

    Arrays are rebuilt whenever the precision changes, which happens during
    the self-check in :func:`alternating_sum`.
    """

    def __init__(self, model: GeomModel, r: int, n: int):
        self.model = model
        self.r = r
        self.n = n
        self._prec = None

    def _build(self):
        prec = mp.prec
        m = self.model.at(prec)
        n, r = self.n, self.r
        q = m.q
        qk = [mpf(1)] * (n + 2)
        for k in range(1, n + 2):
            qk[k] = qk[k - 1] * q
        # u[l] = 1/(Q^l - 1) = q^l/(1 - q^l); u[0] is a pole and never used
        u = [mpf(0)] + [qk[l] / (1 - qk[l]) for l in range(1, n + 2)]
        g = _chain_prefix(u, max(r - 2, 0), n + 1)
        self.q, self.p, self.qk, self.u, self.g = q, m.p, qk, u, g
        self._prec = prec

    def ensure(self):
        if self._prec != mp.prec:
            self._build()

    def weights(self):
        """w_l = g_{r-2}(l) u_l for l >= 1 (r >= 2)."""
        g = self.g[self.r - 2]
        return [mpf(0)] + [g[l] * self.u[l] for l in range(1, self.n + 1)]


def _chain_prefix(u, s_max: int, n: int):
    """g[s][l] = sum over 1 <= i_1 < ... < i_s < l of prod u[i], for l in 0..n."""
    g = [[mpf(1)] * (n + 1)]
    for s in range(1, s_max + 1):
        prev = g[-1]
        row = [mpf(0)] * (n + 1)
        for l in range(1, n + 1):
            row[l] = row[l - 1] + (prev[l - 1] * u[l - 1] if l - 1 >= 1 else 0)
        g.append(row)
    return g


class _PhiTerm(_Tables):
    """k -> phi_r(k) / (1 - q^k)^2 via prefix sums A(k) - q^k B(k)."""

    def _build(self):
        super()._build()
        n, r = self.n, self.r
        if r == 1:
            self.phi = [1 - self.qk[k] for k in range(n + 1)]
            return
        w = self.weights()
        A = mpf(0)
        B = mpf(0)
        phi = [mpf(0)] * (n + 1)
        for k in range(n + 1):
            phi[k] = A - self.qk[k] * B
            if 1 <= k <= n:
                A += w[k] * self.qk[k]
                B += w[k]
        self.phi = phi

    def __call__(self, k: int) -> mpf:
        self.ensure()
        d = 1 - self.qk[k]
        return self.phi[k] / (d * d)


class _PsiTerm(_Tables):
    """k -> psi_r(k) through prefix sums over the last chain index."""

    def _build(self):
        super()._build()
        n, r = self.n, self.r
        q, p, qk, u = self.q, self.p, self.qk, self.u
        c1 = q * q / (p * p)
        c2 = q / (p * p)
        psi = [mpf(0)] * (n + 1)
        if r == 1:
            for k in range(2, n + 1):
                psi[k] = (u[k - 1] - u[k]) * (-(q * q) / (p * p) + q * (k - 1) / p) + c1 * u[k - 1] - c2 * u[k]
            self.psi = psi
            return
        w = self.weights()
        W0 = W1 = W2 = mpf(0)
        for k in range(2, n + 1):
            l = k - 2
            if l >= 1:
                W0 += w[l]
                W1 += w[l] * qk[l]
                W2 += w[l] * l * qk[l]
            bracket = -(q * q) / (p * p) * W1 + q * (k - 1) / p * W1 - q / p * W2
            psi[k] = (u[k - 1] - u[k]) * bracket + (c1 * u[k - 1] - c2 * u[k]) * W0
        self.psi = psi

    def __call__(self, k: int) -> mpf:
        self.ensure()
        return self.psi[k]


def phi(r: int, k: int, model: GeomModel, ctx: PrecisionContext = PrecisionContext()) -> mpf:
    """phi_r(k) = sum_{0<l_1<...<l_{r-1}<k} prod 1/(Q^l - 1) * (q^{l_{r-1}} - q^k).

    For r = 1 the chain is empty and q^{l_0} = 1, giving 1 - q^k. Small
    chain counts are summed directly; otherwise the prefix-sum form is used.
    """
    if r < 1 or k < 0:
        raise DomainError("need r >= 1 and k >= 0")
    if k < r:
        return mpf(0)
    bits = ctx.bits + 32
    with mp.workprec(bits):
        if math.comb(k - 1, r - 1) <= 10_000:
            out = _phi_direct_mp(r, k, model.at(bits))
        else:
            t = _PhiTerm(model, r, k)
            t.ensure()
            out = t.phi[k]
    with mp.workprec(ctx.bits):
        return +out


def _phi_direct_mp(r: int, k: int, m: GeomModel) -> mpf:
    from itertools import combinations

    q, Q = m.q, m.Q
    if r == 1:
        return 1 - q**k
    total = mpf(0)
    qk = q**k
    for chain in combinations(range(1, k), r - 1):
        t = mpf(1)
        for l in chain:
            t /= Q**l - 1
        total += t * (q ** chain[-1] - qk)
    return total


def tau(k, m, model: GeomModel) -> mpf:
    """tau(k, m) for real or integer k (simple poles at k = 0 and k = 1).

    tau(k,m) = (u_{k-1} - u_k)(-q^{m+2}/p^2 + q^{m+1}(k-m-1)/p) + q^2/p^2 u_{k-1} - q/p^2 u_k
    with u_j = 1/(Q^j - 1).
    """
    with mp.workprec(model.bits):
        k = mpf(k)
        m_ = mpf(m)
        if k == 0 or k == 1:
            raise PoleError(f"tau has a pole at k={k}")
        q, p, Q = model.q, model.p, model.Q
        u1 = 1 / (Q ** (k - 1) - 1)
        u0 = 1 / (Q**k - 1)
        return (u1 - u0) * (-(q ** (m_ + 2)) / p**2 + q ** (m_ + 1) * (k - m_ - 1) / p) + q**2 / p**2 * u1 - q / p**2 * u0


def g_chain(s: int, l: int, model: GeomModel) -> mpf:
    """g_s(l) = sum_{1<=i_1<...<i_s<l} prod 1/(Q^i - 1), via the product prod (1 + x u_i)."""
    if s < 0 or l < 0:
        raise DomainError("need s >= 0 and l >= 0")
    if s == 0:
        return mpf(1)
    if l <= s:
        return mpf(0)
    with mp.workprec(model.bits + 16):
        Q = model.at(model.bits + 16).Q
        e = [mpf(1)] + [mpf(0)] * s
        for i in range(1, l):
            ui = 1 / (Q**i - 1)
            for d in range(min(s, i), 0, -1):
                e[d] += e[d - 1] * ui
    with mp.workprec(model.bits):
        return +e[s]


def psi(r: int, k: int, model: GeomModel, ctx: PrecisionContext = PrecisionContext()) -> mpf:
    """psi_r(k) = sum_{l=r-1}^{k-2} g_{r-2}(l) tau(k, l)/(Q^l - 1); tau(k, 0) when r = 1."""
    if k < 2:
        raise DomainError("psi_r(k) needs k >= 2")
    if r < 1:
        raise DomainError("r must be >= 1")
    bits = ctx.bits + 32
    m = model.at(bits)
    with mp.workprec(bits):
        if r == 1:
            out = tau(k, 0, m)
        else:
            out = mpf(0)
            for l in range(r - 1, k - 1):
                out += g_chain(r - 2, l, m) * tau(k, l, m) / (m.Q**l - 1)
    with mp.workprec(ctx.bits):
        return +out


def expected_value_exact(r: int, n: int, model: GeomModel, ctx: PrecisionContext = PrecisionContext()) -> ExactMean:
    """Mean value of the r-th left-to-right maximum from the right (0 if it does not exist)."""
    if r < 1 or n < 0:
        raise DomainError("need r >= 1 and n >= 0")
    if n > MAX_N:
        raise DomainError(f"n={n} exceeds supported maximum {MAX_N}")
    if n < r:
        return ExactMean(r, n, "value", mpf(0), ctx.bits)
    term = _PhiTerm(model, r, n)
    s = alternating_sum(AltSumSpec(n, r, term), out_bits=ctx.bits + 16)
    with mp.workprec(ctx.bits + 16):
        m = model.at(ctx.bits + 16)
        pref = (m.p / m.q) ** (r - 1) * (-1) ** r
        mean = pref * s
    with mp.workprec(ctx.bits):
        return ExactMean(r, n, "value", +mean, ctx.bits)


def expected_position_exact(r: int, n: int, model: GeomModel, ctx: PrecisionContext = PrecisionContext()) -> ExactMean:
    """Mean left-count (position - 1) of the r-th left-to-right maximum from the right.

    Words with fewer than r records contribute 0.
    """
    if r < 1 or n < 0:
        raise DomainError("need r >= 1 and n >= 0")
    if n > MAX_N:
        raise DomainError(f"n={n} exceeds supported maximum {MAX_N}")
    if n <= r:
        return ExactMean(r, n, "leftCount", mpf(0), ctx.bits)
    term = _PsiTerm(model, r, n)
    s = alternating_sum(AltSumSpec(n, r + 1, term), out_bits=ctx.bits + 16)
    with mp.workprec(ctx.bits + 16):
        m = model.at(ctx.bits + 16)
        mean = (-1) ** (r - 1) * (m.p / m.q) ** r * s
    with mp.workprec(ctx.bits):
        return ExactMean(r, n, "leftCount", +mean, ctx.bits)


def expected_value_r1_direct(n: int, model: GeomModel, bits: int | None = None) -> mpf:
    """sum_{k=1}^n C(n,k) (-1)^(k-1) / (1 - q^k), the maximum of n letters."""
    bits = bits or n + 2 * GUARD_BITS
    with mp.workprec(bits):
        q = model.at(bits).q
        return -_sum_at(AltSumSpec(n, 1, lambda k: 1 / (1 - q**k)), bits)


def expected_position_r1_direct(n: int, model: GeomModel, bits: int | None = None) -> mpf:
    """sum_{k=2}^n C(n,k) (-1)^k [(k-1)/(Q^(k-1) - 1) - k/(Q^k - 1)]."""
    bits = bits or n + 2 * GUARD_BITS
    with mp.workprec(bits):
        Q = model.at(bits).Q
        return _sum_at(AltSumSpec(n, 2, lambda k: (k - 1) / (Q ** (k - 1) - 1) - k / (Q**k - 1)), bits)
