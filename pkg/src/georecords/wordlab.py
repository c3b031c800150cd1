"""Simulation and enumeration oracles for record statistics.

A word a_1..a_n has a left-to-right maximum (record) at i when a_i is
strictly larger than every earlier letter. Records are counted from the
right: r = 1 is the last record, whose value is the maximum of the word.
Words with fewer than r records contribute 0 to every mean (indicator
convention); conditional means are reported where they help diagnosis.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from itertools import permutations, product
from typing import Optional, Sequence

import numpy as np

from .qkernel import DomainError, GeomModel

Word = tuple

ENUM_BUDGET = 10**8
CHUNK_CELLS = 2_000_000


@dataclass(frozen=True)
class RecordView:
    exists: bool
    value: int = 0
    left_count: int = 0


@dataclass(frozen=True)
class MeanEstimate:
    mean: float
    half_width95: float
    samples: int
    seed: int

    def covers(self, target: float, widths: float = 1.0) -> bool:
        return abs(self.mean - target) <= widths * self.half_width95


@dataclass(frozen=True)
class EnumResult:
    value_mean: Fraction
    left_count_mean: Fraction
    tail_bound_value: Fraction
    tail_bound_position: Fraction
    alphabet_cap: int


def sample_word(n: int, model: GeomModel, rng: np.random.Generator) -> Word:
    """n letters with P{X=k} = p q^(k-1), by inversion k = 1 + floor(ln U / ln q)."""
    return tuple(int(x) for x in _geometric_letters(rng, (n,), float(model.q_exact)))


def _geometric_letters(rng: np.random.Generator, shape, q: float) -> np.ndarray:
    u = 1.0 - rng.random(shape)  # (0, 1]
    return 1 + np.floor(np.log(u) / math.log(q)).astype(np.int64)


def geometric_from_uniform(u: float, q: float) -> int:
    """Inverse-CDF map used by :func:`sample_word`, exposed for testing."""
    return 1 + math.floor(math.log(u) / math.log(q))


def scan_records(word: Sequence[int]) -> list[tuple[int, int]]:
    """Strict left-to-right maxima as 1-based (index, value) pairs."""
    out = []
    best = None
    for i, a in enumerate(word, start=1):
        if best is None or a > best:
            out.append((i, a))
            best = a
    return out


def rth_from_right(records: Sequence[tuple[int, int]], r: int) -> RecordView:
    if r < 1:
        raise DomainError("r must be >= 1")
    if len(records) < r:
        return RecordView(False)
    idx, value = records[len(records) - r]
    return RecordView(True, value, idx - 1)


def truncation_level(n: int, q: Fraction, tol: float) -> int:
    """Smallest alphabet cap M whose tail bounds (see :func:`_tail_bounds`) are <= tol."""
    q = Fraction(q)
    if not tol > 0:
        raise DomainError("tol must be positive")
    p = float(1 - q)
    lq = math.log(float(q))
    M = max(1, math.ceil(math.log(tol / (n * (1 / p + n))) / lq))
    while n * math.exp(M * lq) * (M + 1 / p) > tol or n * n * math.exp(M * lq) > tol:
        M += 1
    while M > 1:
        tv, tp = _tail_bounds(n, M - 1, q)
        if tv > tol or tp > tol:
            break
        M -= 1
    return M


def _tail_bounds(n: int, M: int, q: Fraction) -> tuple[Fraction, Fraction]:
    p = 1 - q
    qM = q**M
    return n * qM * (M + 1 / p), n * n * qM


def enumerate_brute(n: int, M: int, r: int, q: Fraction) -> EnumResult:
    """Literal sum over every word in {1..M}^n (small budgets only)."""
    if M**n > ENUM_BUDGET:
        raise DomainError(f"M^n = {M**n} exceeds the enumeration budget")
    q = Fraction(q)
    p = 1 - q
    prob = [Fraction(0)] + [p * q ** (a - 1) for a in range(1, M + 1)]
    val = Fraction(0)
    lc = Fraction(0)
    for word in product(range(1, M + 1), repeat=n):
        view = rth_from_right(scan_records(word), r)
        if not view.exists:
            continue
        w = Fraction(1)
        for a in word:
            w *= prob[a]
        val += w * view.value
        lc += w * view.left_count
    tv, tp = _tail_bounds(n, M, q)
    return EnumResult(val, lc, tv, tp, M)


def enumerate_truncated(n: int, M: int, r: int, q: Fraction) -> EnumResult:
    """Exact sums over all words in {1..M}^n, organised by the target record.

    A word has its r-th record from the right at position j with value h iff
    the j-1 letters before it are < h, a_j = h, and the suffix of length n-j
    has exactly r-1 records above the running maximum h. The suffix counts
    come from a dynamic programme over (running maximum, records so far).
    Letter weights are scaled by b^M (q = a/b) so everything stays integral.
    """
    if n < 0 or M < 1 or r < 1:
        raise DomainError("need n >= 0, M >= 1, r >= 1")
    q = Fraction(q)
    tv, tp = _tail_bounds(n, M, q)
    if r > n:
        return EnumResult(Fraction(0), Fraction(0), tv, tp, M)
    a, b = q.numerator, q.denominator
    w = [0] + [(b - a) * a ** (k - 1) * b ** (M - k) for k in range(1, M + 1)]
    F = [0] * (M + 1)
    for k in range(1, M + 1):
        F[k] = F[k - 1] + w[k]
    val_sum = 0
    lc_sum = 0
    for h in range(1, M + 1):
        suffix = _suffix_counts(h, M, r - 1, n - 1, w, F)
        prefix = 1
        for j in range(1, n + 1):
            weight = prefix * w[h] * suffix[n - j]
            val_sum += h * weight
            lc_sum += (j - 1) * weight
            prefix *= F[h - 1]
    denom = b ** (M * n)
    return EnumResult(Fraction(val_sum, denom), Fraction(lc_sum, denom), tv, tp, M)


def _suffix_counts(h: int, M: int, target: int, max_len: int, w, F) -> list[int]:
    """S[m] = weight of length-m words with exactly ``target`` records above h."""
    width = M - h + 1
    # state[c][g - h]: weight with running max g and c records so far
    state = [[0] * width for _ in range(target + 1)]
    state[0][0] = 1
    out = [state[target][0] if target == 0 else 0]
    for _ in range(max_len):
        new = [[0] * width for _ in range(target + 1)]
        for c in range(target + 1):
            row = state[c]
            nrow = new[c]
            for i in range(width):
                if row[i]:
                    nrow[i] += row[i] * F[h + i]
            if c + 1 <= target:
                up = new[c + 1]
                run = 0
                for i in range(width):
                    if run:
                        up[i] += run * w[h + i]
                    run += row[i]
        state = new
        out.append(sum(state[target]))
    return out


@dataclass(frozen=True)
class PermEnum:
    """Exact permutation means for the r-th record from the right.

    ``left_count_mean`` and ``position_mean`` use the indicator convention;
    ``conditional_position`` averages over permutations that have r records.
    """

    n: int
    r: int
    left_count_mean: Fraction
    position_mean: Fraction
    conditional_position: Fraction
    p_exists: Fraction


def permutation_enumerate(n: int, r: int) -> PermEnum:
    """Average over all n! permutations (n <= 8)."""
    if math.factorial(n) > 40320:
        raise DomainError("n! exceeds the permutation enumeration budget")
    if r < 1:
        raise DomainError("r must be >= 1")
    total = 0
    hits = 0
    count = 0
    for perm in permutations(range(1, n + 1)):
        count += 1
        view = rth_from_right(scan_records(perm), r)
        if view.exists:
            hits += 1
            total += view.left_count
    count = max(count, 1)
    cond = Fraction(total + hits, hits) if hits else Fraction(0)
    return PermEnum(n, r, Fraction(total, count), Fraction(total + hits, count), cond,
                    Fraction(hits, count))


# ---------------------------------------------------------------- Monte Carlo


def _record_stats(words: np.ndarray, rs: Sequence[int]):
    """Per-row value and left-count of the r-th record from the right (0 if absent)."""
    B, n = words.shape
    runmax = np.maximum.accumulate(words, axis=1)
    is_rec = np.empty((B, n), dtype=bool)
    is_rec[:, 0] = True
    np.greater(words[:, 1:], runmax[:, :-1], out=is_rec[:, 1:])
    rank = np.cumsum(is_rec, axis=1, dtype=np.int32)
    nrec = rank[:, -1]
    out = {}
    for r in rs:
        target = nrec - r + 1
        exists = target >= 1
        hit = is_rec & (rank == target[:, None])
        idx = np.argmax(hit, axis=1)
        value = np.where(exists, words[np.arange(B), idx], 0)
        left = np.where(exists, idx, 0)
        out[r] = (value.astype(np.float64), left.astype(np.float64))
    return out


def _mc_chunk(args):
    mode, n, rs, size, q, seed_seq = args
    rng = np.random.Generator(np.random.PCG64(seed_seq))
    if mode == "geometric":
        words = _geometric_letters(rng, (size, n), q)
    else:
        words = rng.permuted(np.tile(np.arange(1, n + 1, dtype=np.int32), (size, 1)), axis=1)
    stats = _record_stats(words, rs)
    # per-chunk sums of x and x^2, reduced later in chunk order
    return {
        r: (float(v.sum()), float((v * v).sum()), float(lc.sum()), float((lc * lc).sum()))
        for r, (v, lc) in stats.items()
    }


def _chunk_sizes(samples: int, n: int) -> list[int]:
    per = max(1, min(samples, CHUNK_CELLS // max(n, 1)))
    sizes = [per] * (samples // per)
    if samples % per:
        sizes.append(samples % per)
    return sizes


def _estimate(s: float, s2: float, samples: int, seed: int) -> MeanEstimate:
    mean = s / samples
    var = max(s2 / samples - mean * mean, 0.0) * samples / max(samples - 1, 1)
    return MeanEstimate(mean, 1.96 * math.sqrt(var / samples), samples, seed)


def monte_carlo_multi(
    mode: str,
    n: int,
    rs: Sequence[int],
    samples: int,
    seed: int,
    model: Optional[GeomModel] = None,
    workers: int = 1,
) -> dict:
    """Monte Carlo means for several r from the same replications.

    Returns ``{r: (value_estimate or None, left_count_estimate)}``. Chunking
    depends only on (samples, n), each chunk owns a spawned seed sequence,
    and partial sums are combined in chunk order, so results do not depend
    on ``workers``.
    """
    if samples < 1000:
        raise DomainError("samples must be >= 1000")
    if mode not in ("geometric", "permutation"):
        raise DomainError(f"unknown mode {mode!r}")
    if mode == "geometric" and model is None:
        raise DomainError("geometric mode needs a model")
    rs = tuple(sorted(set(rs)))
    q = float(model.q_exact) if model is not None else 0.0
    sizes = _chunk_sizes(samples, n)
    seqs = np.random.SeedSequence(seed).spawn(len(sizes))
    jobs = [(mode, n, rs, size, q, ss) for size, ss in zip(sizes, seqs)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_mc_chunk, jobs))
    else:
        parts = [_mc_chunk(j) for j in jobs]
    out = {}
    for r in rs:
        sv = sv2 = sl = sl2 = 0.0
        for part in parts:
            a, b, c, d = part[r]
            sv += a
            sv2 += b
            sl += c
            sl2 += d
        value = _estimate(sv, sv2, samples, seed) if mode == "geometric" else None
        out[r] = (value, _estimate(sl, sl2, samples, seed))
    return out


def monte_carlo(mode, n, r, samples, seed, model=None, workers=1):
    """(value estimate or None, left-count estimate) for one r."""
    return monte_carlo_multi(mode, n, (r,), samples, seed, model, workers)[r]


def sample_permutations(n: int, samples: int, seed: int) -> np.ndarray:
    """Rows of uniformly random permutations of 1..n (Fisher-Yates per row)."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    return rng.permuted(np.tile(np.arange(1, n + 1), (samples, 1)), axis=1)
