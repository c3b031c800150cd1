"""Asymptotic constants for the value and position of the r-th record.

Value: E[value] = log_Q n + sigma_r + (periodic) + o(1).
Position: E[left count] ~ slope_r * n with slope_r = (-1)^(r-1) (p/q)^r psi_r(1).

Two versions of sigma_r and beta_r are kept. ``sigma``/``beta`` are the
values reproduced by the exact finite-n means and by differentiating the
analytic continuation of phi_r(z)/(1-q^z); ``sigma_displayed`` and
``beta_displayed`` keep the published three-sum displays, which agree with
the former only for r <= 2. See the decisions ledger for the comparison.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import mpmath
from mpmath import mp, mpf

from .exactmeans import PoleError
from .qkernel import (
    BoundedValue,
    DomainError,
    GeomModel,
    MathConstants,
    PrecisionContext,
    math_constants,
    q_harmonic_sums,
)

MELLIN_T_MAX = 0.2
RICHARDSON_EPS = (mpf("1e-3"), mpf("1e-4"))


@dataclass(frozen=True)
class ValueAsymptote:
    r: int
    sigma: BoundedValue
    model: GeomModel

    def prediction(self, n: int) -> mpf:
        with mp.workprec(self.model.bits):
            return mpmath.log(n) / self.model.L + self.sigma.estimate


@dataclass(frozen=True)
class PositionAsymptote:
    r: int
    slope: BoundedValue
    model: GeomModel


# ------------------------------------------------------------------ sigma, beta


def _record_series(r: int, model: GeomModel, ctx: PrecisionContext) -> BoundedValue:
    """S_r = sum_j a_j/(1-q^j) * sum_{i=0}^{r-2} a_j^i with a_j = p q^(j-1)/(1-q^j).

    Every summand is at most (r-1) p q^(j-1)/(1-q^j)^2, so the tail past J
    is at most (r-1) q^J / (1-q^(J+1))^2.
    """
    if r == 1:
        return BoundedValue(mpf(0), mpf(0))
    bits = ctx.bits + 16
    m = model.at(bits)
    with mp.workprec(bits):
        q, p = m.q, m.p
        tol = mpf(ctx.series_tol) / 2
        total = mpf(0)
        qj1 = mpf(1)  # q^(j-1)
        j = 0
        while True:
            j += 1
            qj = qj1 * q
            d = 1 - qj
            a = p * qj1 / d
            inner = mpf(0)
            ai = mpf(1)
            for _ in range(r - 1):
                inner += ai
                ai *= a
            total += a / d * inner
            qj1 = qj
            tail = (r - 1) * qj / (1 - qj * q) ** 2
            if tail <= tol:
                break
        err = tail + abs(total) * j * mpf(2) ** (-ctx.bits)
        return BoundedValue(+total, err)


def sigma(r: int, model: GeomModel, ctx: PrecisionContext = PrecisionContext(),
          constants: Optional[MathConstants] = None) -> BoundedValue:
    """sigma_r = gamma/L + 1/2 - S_r (see :func:`_record_series`); sigma_1 = gamma/L + 1/2.

    >>> from georecords.qkernel import make_model
    >>> float(sigma(1, make_model("1/2")).estimate)  # doctest: +ELLIPSIS
    1.33274...
    """
    if r < 1:
        raise DomainError("r must be >= 1")
    constants = constants or math_constants(ctx, (2,))
    s = _record_series(r, model, ctx)
    m = model.at(ctx.bits)
    with mp.workprec(ctx.bits):
        est = constants.gamma / m.L + mpf(1) / 2 - s.estimate
    return BoundedValue(est, s.err + abs(est) * mpf(2) ** (4 - ctx.bits))


def sigma_termwise(r: int, j: int, q) -> Fraction:
    """Summand j of the published three-sum form, merged into one rational.

    -p^(r-1) q^((j-1)(r-1))/(1-q^j)^r - p q^j/(1-q^j)^2
        + p^(r-1) q^(j(r-1)) / ((1-q^j)^2 (1-q^(j+1))^(r-2))

    For r = 1 this is identically zero.
    """
    q = Fraction(q)
    p = 1 - q
    d = 1 - q**j
    d1 = 1 - q ** (j + 1)
    e = r - 1
    return (-(p**e) * q ** ((j - 1) * e) / d**r - p * q**j / d**2
            + p**e * q ** (j * e) / (d**2 * d1 ** (r - 2)))


def sigma_displayed(r: int, model: GeomModel, ctx: PrecisionContext = PrecisionContext(),
                    constants: Optional[MathConstants] = None) -> BoundedValue:
    """The published three-sum expression for sigma_r, merged termwise.

    Tail past J, with D = 1/(1-q^(J+1)):
        p^(r-1) D^r q^(J(r-1))/(1-q^(r-1)) + D^2 q^(J+1)
        + p^(r-1) D^r q^((J+1)(r-1))/(1-q^(r-1)).
    For r = 1 the merged summand vanishes and only gamma/L + 1/2 remains.
    """
    if r < 1:
        raise DomainError("r must be >= 1")
    constants = constants or math_constants(ctx, (2,))
    bits = ctx.bits + 16
    m = model.at(bits)
    with mp.workprec(bits):
        q, p = m.q, m.p
        head = constants.gamma / m.L + mpf(1) / 2
        if r == 1:
            return BoundedValue(+head, abs(head) * mpf(2) ** (4 - ctx.bits))
        e = r - 1
        pe = p**e
        tol = mpf(ctx.series_tol) / 2
        total = mpf(0)
        qj1 = mpf(1)
        j = 0
        while True:
            j += 1
            qj = qj1 * q
            d = 1 - qj
            d1 = 1 - qj * q
            total += (-pe * qj1**e / d**r - p * qj / d**2 + pe * qj**e / (d**2 * d1 ** (r - 2)))
            qj1 = qj
            D = 1 / d1
            tail = (pe * D**r * qj**e / (1 - q**e) + D**2 * qj * q
                    + pe * D**r * (qj * q) ** e / (1 - q**e))
            if tail <= tol:
                break
        est = head + total
        return BoundedValue(+est, tail + abs(est) * j * mpf(2) ** (-ctx.bits))


def beta(r: int, model: GeomModel, ctx: PrecisionContext = PrecisionContext()) -> BoundedValue:
    """Slope at z = 0 of the continued phi_r(z)/(1-q^z), r >= 2.

    beta_r = (-1)^r L (q/p)^(r-1) S_r, equivalently
    L (-1)^r sum_j rho_j/(1-q^j) h_{r-2}(rho_j, q/p) with rho_j = q^j/(1-q^j).
    """
    if r < 2:
        raise DomainError("beta_r is defined for r >= 2")
    s = _record_series(r, model, ctx)
    m = model.at(ctx.bits + 16)
    with mp.workprec(ctx.bits + 16):
        scale = (-1) ** r * m.L * (m.q / m.p) ** (r - 1)
        est = scale * s.estimate
        err = abs(scale) * s.err
    with mp.workprec(ctx.bits):
        return BoundedValue(+est, err + abs(est) * mpf(2) ** (4 - ctx.bits))


def beta_displayed(r: int, model: GeomModel, ctx: PrecisionContext = PrecisionContext()) -> BoundedValue:
    """The published two-sum display for beta_r (matches :func:`beta` only at r = 2)."""
    if r < 2:
        raise DomainError("beta_r is defined for r >= 2")
    bits = ctx.bits + 16
    m = model.at(bits)
    with mp.workprec(bits):
        q, p, L = m.q, m.p, m.L
        c = (q / p) ** (r - 2)
        tol = mpf(ctx.series_tol) / 2
        s1 = mpf(0)
        s2 = mpf(0)
        qj = mpf(1)
        j = 0
        while True:
            j += 1
            qj *= q
            d = 1 - qj
            qn = qj * q
            s1 += qj ** (r - 1) / d**r
            s2 += qj / d**2 * (c - (qn / (1 - qn)) ** (r - 2))
            D = 1 / (1 - qn)
            tail1 = D**r * qn ** (r - 1) / (1 - q ** (r - 1))
            tail2 = c * D**2 * qn / p
            if L * (tail1 + q * tail2) <= tol:
                break
        sign = (-1) ** r
        est = sign * L * s1 + sign * q * L * s2
        err = L * (tail1 + q * tail2) + abs(est) * j * mpf(2) ** (-ctx.bits)
    with mp.workprec(ctx.bits):
        return BoundedValue(+est, err)


def _ratio_product_series(c, d, q, degree: int, tol: mpf):
    """Coefficients of prod_i (1 + a_i x)/(1 + b_i x), a_i = c_i/(1-c_i), b_i = d_i/(1-d_i),
    with c_i = c q^i and d_i = d q^i.

    The log-product is accumulated as power sums and exponentiated.
    """
    psum = [mpf(0)] * (degree + 1)
    while True:
        a = c / (1 - c)
        b = d / (1 - d)
        pa, pb = a, b
        for k in range(1, degree + 1):
            psum[k] += (-1) ** (k + 1) * (pa - pb) / k
            pa *= a
            pb *= b
        if abs(a - b) + abs(a) ** 2 < tol and abs(a) < mpf(1) / 4 and abs(b) < mpf(1) / 4:
            break
        c *= q
        d *= q
    out = [mpf(1)] + [mpf(0)] * degree
    for k in range(1, degree + 1):
        out[k] = sum(i * psum[i] * out[k - i] for i in range(1, k + 1)) / k
    return out


def phi_ratio_continued(r: int, z, model: GeomModel, ctx: PrecisionContext = PrecisionContext()) -> mpf:
    """phi_r(z)/(1 - q^z) for real z, through the Pochhammer extension.

    phi_r(z)/(1-q^z) = [x^(r-1)] ( A(z) - K(z) B(z) ), where
        A(z) = ((1-x)q; q)_z / (q; q)_z,
        B(z) = ((1-x)q^2; q)_z / (q; q)_z,
        K(z) = x q / (1 - (1-x) q^(z+1)),
    and each finite Pochhammer ratio is the infinite ratio of shifted products.
    At integer z = k this reproduces phi_r(k)/(1-q^k).
    """
    if r < 1:
        raise DomainError("r must be >= 1")
    bits = ctx.bits + 32
    m = model.at(bits)
    with mp.workprec(bits):
        q = m.q
        z = mpf(z)
        qz = q**z
        deg = r - 1
        tol = mpf(ctx.series_tol) * mpf(2) ** -40
        # prod_{i>=0} (1+x a_i)/(1+x b_i) with c_i = q^(1+i), d_i = q^(1+i+z)
        A = _ratio_product_series(q, q * qz, q, deg, tol)
        Braw = _ratio_product_series(q**2, q**2 * qz, q, deg, tol)
        # (1-x)q^2 starts one factor later than (q;q): multiply by (1-q^(z+1))/(1-q)
        B = [b * (1 - q * qz) / (1 - q) for b in Braw]
        e = q * qz
        c = e / (1 - e)
        K = [mpf(0)] + [q / (1 - e) * (-c) ** (k - 1) for k in range(1, deg + 1)]
        KB = sum(K[i] * B[deg - i] for i in range(deg + 1))
        out = A[deg] - KB
    with mp.workprec(ctx.bits):
        return +out


def beta_by_difference(r: int, model: GeomModel, ctx: PrecisionContext = PrecisionContext(),
                       h=mpf("1e-4")) -> mpf:
    """Central difference of :func:`phi_ratio_continued` at z = 0."""
    with mp.workprec(ctx.bits + 32):
        h = mpf(h)
        f1 = phi_ratio_continued(r, h, model, ctx.with_bits(ctx.bits + 32))
        f0 = phi_ratio_continued(r, -h, model, ctx.with_bits(ctx.bits + 32))
        return (f1 - f0) / (2 * h)


# ------------------------------------------------------------------ position


def psi2_at_1(model: GeomModel, ctx: PrecisionContext = PrecisionContext()) -> BoundedValue:
    """psi_2(1) from the harmonic-sum closed form.

    -(p^2/q^2) psi_2(1) = -(p/(qL)) S1 + (p/q) S2 + 1/L - 1/p - q/p,
    S1 = sum 1/(Q^l - 1), S2 = sum l Q^l/(Q^l - 1)^2.
    """
    s1, s2 = q_harmonic_sums(model, ctx)
    bits = ctx.bits + 16
    m = model.at(bits)
    with mp.workprec(bits):
        q, p, L = m.q, m.p, m.L
        inner = -(p / (q * L)) * s1.estimate + (p / q) * s2.estimate + 1 / L - 1 / p - q / p
        scale = q**2 / p**2
        est = -scale * inner
        err = scale * ((p / (q * L)) * s1.err + (p / q) * s2.err) + abs(est) * mpf(2) ** (8 - ctx.bits)
    with mp.workprec(ctx.bits):
        return BoundedValue(+est, err)


class _PsiContinuation:
    """psi_r(z) for real z near an integer, r <= 3.

    psi_r(z) = sum_l g_{r-2}(l) tau(z,l) u_l - sum_l g_{r-2}(l+z-1) tau(z,l+z-1) u_{l+z-1}
    with u_y = 1/(Q^y - 1). g_s at shifted arguments comes from the power sums
    P_m(y) = sum_i (u_i^m - u_{i+y-1}^m): g_1 = P_1, g_2 = (P_1^2 - P_2)/2.
    """

    def __init__(self, r: int, model: GeomModel, ctx: PrecisionContext):
        self.r = r
        self.bits = ctx.bits + 64
        self.m = model.at(self.bits)
        with mp.workprec(self.bits):
            q, p = self.m.q, self.m.p
            # terms decay like q^l l / p^3 times at most 1/eps and g_1(inf)^(r-2)
            g_inf = 1 + mpmath.log(1 / p) / p
            target = mpf(ctx.series_tol) * p**3 / (mpf(10) ** 6 * g_inf ** max(r - 2, 0))
            n = 1
            while q**n * (n + 10) > target:
                n = max(n + 1, int(n * 1.25))
            self.N = n
            self.u = [mpf(0)] * (n + 2)
            ql = mpf(1)
            for l in range(1, n + 2):
                ql *= q
                self.u[l] = ql / (1 - ql)

    def __call__(self, z) -> mpf:
        r, N, u = self.r, self.N, self.u
        with mp.workprec(self.bits):
            q, p = self.m.q, self.m.p
            z = mpf(z)
            qz = q**z
            uz1 = qz / (q - qz)
            uz = qz / (1 - qz)
            # tau(z, m) = d (-q^(m+2)/p^2 + q^(m+1)(z-m-1)/p) + c
            d = uz1 - uz
            c = q**2 / p**2 * uz1 - q / p**2 * uz
            a2 = q**2 / p**2
            a1 = q / p
            if r == 1:
                return d * (-a2 + a1 * (z - 1)) + c
            s = r - 2
            first = mpf(0)
            p1 = p2 = mpf(0)
            ql = mpf(1)
            for l in range(1, N + 1):
                ql *= q
                if s == 0:
                    g = 1
                elif s == 1:
                    g = p1
                else:
                    g = (p1 * p1 - p2) / 2
                if g:
                    first += g * (d * ql * (-a2 + a1 * (z - l - 1)) + c) * u[l]
                p1 += u[l]
                if s == 2:
                    p2 += u[l] * u[l]
            tot1, tot2 = p1, p2
            # shifted lattice w_j = u_{j+z-1}; suffix sums give P_m(l+z-1) = G_m - V_m(l)
            w = [mpf(0)] * (N + 2)
            qm = qz / q
            for j in range(1, N + 2):
                qm *= q
                w[j] = qm / (1 - qm)
            v1 = mpf(0)
            v2 = mpf(0)
            if s >= 1:
                v1 = mpf(mpmath.fsum(w[1:]))
            if s == 2:
                v2 = mpf(mpmath.fsum(x * x for x in w[1:]))
            second = mpf(0)
            qm = qz / q
            for l in range(1, N + 1):
                qm *= q  # q^(l+z-1)
                if s == 0:
                    g = 1
                elif s == 1:
                    g = tot1 - v1
                else:
                    P1 = tot1 - v1
                    g = (P1 * P1 - (tot2 - v2)) / 2
                # tau(z, l+z-1): z - m - 1 = -l
                second += g * (d * qm * (-a2 - a1 * l) + c) * w[l]
                v1 -= w[l]
                if s == 2:
                    v2 -= w[l] * w[l]
            return first - second


def psi_at_numeric(r: int, z0: int, model: GeomModel, ctx: PrecisionContext = PrecisionContext(),
                   eps=RICHARDSON_EPS) -> BoundedValue:
    """psi_r(z0) for z0 in {0, 1} from symmetric averages and one Richardson step.

    A(e) = (f(z0+e) + f(z0-e))/2 = f(z0) + c e^2 + O(e^4), so
    R = (e1^2 A(e2) - e2^2 A(e1))/(e1^2 - e2^2). The reported bound is
    |R - A(e2)| plus the series target. A non-removable singularity shows up
    as A(e) growing like 1/e^2 and raises :class:`PoleError`.
    """
    if r < 1:
        raise DomainError("r must be >= 1")
    if r >= 4:
        raise DomainError("psi_r(z) needs g_s extensions with s >= 2; only r <= 3 is supported")
    if z0 not in (0, 1):
        raise DomainError("z0 must be 0 or 1")
    f = _PsiContinuation(r, model, ctx)
    e1, e2 = (mpf(e) for e in eps)
    with mp.workprec(f.bits):
        a1 = (f(z0 + e1) + f(z0 - e1)) / 2
        a2 = (f(z0 + e2) + f(z0 - e2)) / 2
        if abs(a2 - a1) > mpf("1e-2") * max(1, abs(a1)):
            raise PoleError(f"psi_{r} is singular at z = {z0}")
        R = (e1**2 * a2 - e2**2 * a1) / (e1**2 - e2**2)
        err = abs(R - a2) + mpf(ctx.series_tol)
    with mp.workprec(ctx.bits):
        return BoundedValue(+R, err)


def position_leading_coeff(r: int, model: GeomModel, ctx: PrecisionContext = PrecisionContext()) -> PositionAsymptote:
    """slope_r = (-1)^(r-1) (p/q)^r psi_r(1) for r <= 3."""
    if not 1 <= r <= 3:
        raise DomainError("position slope is available for 1 <= r <= 3")
    psi1 = psi_at_numeric(r, 1, model, ctx)
    m = model.at(ctx.bits)
    with mp.workprec(ctx.bits):
        scale = (-1) ** (r - 1) * (m.p / m.q) ** r
        return PositionAsymptote(r, BoundedValue(scale * psi1.estimate, abs(scale) * psi1.err), model)


def slope_r1_closed(model: GeomModel) -> mpf:
    """1/L - q/p, the leading coefficient for the maximum's position."""
    with mp.workprec(model.bits):
        return 1 / model.L - model.q / model.p


# ------------------------------------------------------------------ q -> 1


def mellin_reference(t, which: str, constants: Optional[MathConstants] = None) -> mpf:
    """Small-t expansions with q = e^(-t):

    invQl: sum 1/(Q^l-1)          ~ -ln t/t + gamma/t + 1/4
    lQl:   sum l Q^l/(Q^l-1)^2    ~ -ln t/t^2 + (1+gamma)/t^2
    """
    t = mpf(t)
    if not 0 < t <= MELLIN_T_MAX:
        raise DomainError(f"t must lie in (0, {MELLIN_T_MAX}]")
    g = constants.gamma if constants is not None else +mpmath.euler
    lt = mpmath.log(t)
    if which == "invQl":
        return -lt / t + g / t + mpf(1) / 4
    if which == "lQl":
        return -lt / t**2 + (1 + g) / t**2
    raise DomainError(f"unknown expansion {which!r}")


def sigma_zeta_limit(r: int, constants: MathConstants) -> mpf:
    """Published closed form for lim (1-q) sigma_r as q -> 1, r >= 4.

    sum_{k=3}^{r-3} (r-1-k) zeta(k) + (r-1) zeta(2) + zeta(r-2) - zeta(r) - r(r-3)/2,
    the k-sum being empty for r < 6.
    """
    if r < 4:
        raise DomainError("the closed form needs r >= 4 (zeta(r-2) diverges at r = 3)")
    with mp.workprec(constants.bits):
        out = sum(((r - 1 - k) * constants.zeta(k) for k in range(3, r - 2)), mpf(0))
        out += (r - 1) * constants.zeta(2) + constants.zeta(r - 2) - constants.zeta(r)
        out -= mpf(r * (r - 3)) / 2
        return out


def sigma_q1_limit(r: int, constants: MathConstants) -> mpf:
    """lim (1-q) sigma_r as q -> 1 for :func:`sigma`: gamma - zeta(2) - ... - zeta(r)."""
    if r < 1:
        raise DomainError("r must be >= 1")
    with mp.workprec(constants.bits):
        return constants.gamma - sum((constants.zeta(s) for s in range(2, r + 1)), mpf(0))


# ------------------------------------------------------------------ permutations


def _linear_product(roots, degree: int) -> list[Fraction]:
    """Coefficients of prod (c - x) over c in ``roots``, truncated at ``degree``."""
    out = [Fraction(1)] + [Fraction(0)] * degree
    for c in roots:
        new = [Fraction(0)] * (degree + 1)
        for i, a in enumerate(out):
            if a:
                new[i] += c * a
                if i + 1 <= degree:
                    new[i + 1] -= a
        out = new
    return out


def _series_divide(num, den, degree: int) -> list[Fraction]:
    out = [Fraction(0)] * (degree + 1)
    for i in range(degree + 1):
        acc = num[i] if i < len(num) else Fraction(0)
        for j in range(1, min(i, len(den) - 1) + 1):
            acc -= den[j] * out[i - j]
        out[i] = acc / den[0]
    return out


def permutation_kernel(k: int, degree: int) -> list[Fraction]:
    """Series in x of (1/(2x)) [2 Gamma(k+1-x)/(k! Gamma(3-x)) - 1], exactly."""
    if k < 0:
        raise DomainError("k must be >= 0")
    d = degree + 1
    # Gamma(k+1-x)/Gamma(3-x) as a ratio of products of (c - x)
    if k >= 2:
        num = _linear_product(range(3, k + 1), d)
        den = [Fraction(1)]
    else:
        num = [Fraction(1)]
        den = _linear_product(range(k + 1, 3), d)
    ratio = _series_divide(num, den, d)
    full = [2 * c / math.factorial(k) for c in ratio]
    full[0] -= 1
    if full[0] != 0:
        raise ArithmeticError("kernel constant term must vanish")
    return [c / 2 for c in full[1:]]


def permutation_constants(r: int, n: Optional[int] = None):
    """(lambda_r, mu_r, (n+1)/2^r or None) in exact rationals.

    lambda_r and mu_r are the x^(r-2) coefficients of the kernel at k = 1 and
    k = 0; r = 1 has the empty chain and gives 1/2 for both.

    >>> permutation_constants(2, 3)
    (Fraction(1, 4), Fraction(3, 4), Fraction(1, 1))
    """
    if r < 1:
        raise DomainError("r must be >= 1")
    if r == 1:
        lam = mu = Fraction(1, 2)
    else:
        lam = permutation_kernel(1, r - 2)[r - 2]
        mu = permutation_kernel(0, r - 2)[r - 2]
    pred = Fraction(n + 1, 2**r) if n is not None else None
    return lam, mu, pred
