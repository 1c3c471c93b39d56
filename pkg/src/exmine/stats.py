"""Rank-based tests and the special functions behind their p-values.

Kruskal-Wallis H (tie corrected, chi-square approximated), Dunn's pairwise
z on pooled ranks, Bonferroni adjustment, a Jarque-Bera normality screen and
bias-corrected descriptive moments.
"""
from __future__ import annotations

import enum
import math
import sys
from dataclasses import dataclass
from typing import Sequence

import numpy as np

_EPS = 1e-16
_TINY = sys.float_info.min / sys.float_info.epsilon
_MAX_ITER = 100_000


class Direction(enum.Enum):
    LONGER = "LONGER"
    SHORTER = "SHORTER"
    NOT_SIGNIFICANT = "NOT_SIGNIFICANT"
    NOT_APPLICABLE = "NOT_APPLICABLE"


@dataclass(frozen=True)
class GroupStats:
    n: int
    mean: float
    std: float
    skewness: float | None
    kurtosis: float | None


@dataclass(frozen=True)
class TestResult:
    statistic: float
    df: int
    p_raw: float
    p_adjusted: float
    direction: Direction | None = None

    __test__ = False  # not a pytest class

    def adjusted(self, p_adjusted: float) -> "TestResult":
        return TestResult(self.statistic, self.df, self.p_raw, p_adjusted, self.direction)


# -- special functions -------------------------------------------------------

def _gamma_series(a: float, x: float) -> float:
    """Regularized lower incomplete gamma P(a, x) by its power series."""
    term = total = 1.0 / a
    ap = a
    for _ in range(_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_cf(a: float, x: float) -> float:
    """Regularized upper incomplete gamma Q(a, x) by modified Lentz continued fraction."""
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h


def gamma_q(a: float, x: float) -> float:
    if a <= 0:
        raise ValueError("a must be positive")
    if x < 0:
        raise ValueError("x must be non-negative")
    if x == 0:
        return 1.0
    if x < a + 1.0:
        return max(0.0, 1.0 - _gamma_series(a, x))
    return min(1.0, _gamma_cf(a, x))


def chi2_sf(x: float, df: int) -> float:
    if df < 1:
        raise ValueError("df must be a positive integer")
    if x < 0:
        raise ValueError("x must be non-negative")
    if math.isinf(x):
        return 0.0
    return gamma_q(df / 2.0, x / 2.0)


def normal_sf(z: float) -> float:
    return 0.5 * math.erfc(z / math.sqrt(2.0))


# -- descriptive -------------------------------------------------------------

def descriptive_stats(samples: Sequence[float]) -> GroupStats:
    x = np.asarray(samples, dtype=float)
    n = x.size
    if n < 1:
        raise ValueError("need at least one sample")
    mean = float(x.mean())
    if n == 1:
        return GroupStats(1, mean, 0.0, None, None)
    dev = x - mean
    std = math.sqrt(float(dev @ dev) / (n - 1))
    if std == 0.0:
        return GroupStats(n, mean, 0.0, None, None)
    z = dev / std
    skew = kurt = None
    if n >= 3:
        skew = n / ((n - 1) * (n - 2)) * float(np.sum(z ** 3))
    if n >= 4:
        kurt = (n * (n + 1) / ((n - 1) * (n - 2) * (n - 3)) * float(np.sum(z ** 4))
                - 3.0 * (n - 1) ** 2 / ((n - 2) * (n - 3)))
    return GroupStats(n, mean, std, skew, kurt)


# -- ranks and rank tests ----------------------------------------------------

def _ranks_and_ties(values) -> tuple[np.ndarray, float]:
    x = np.asarray(values, dtype=float)
    uniq, inverse, counts = np.unique(x, return_inverse=True, return_counts=True)
    below = np.concatenate(([0], np.cumsum(counts)[:-1]))
    mid = below + (counts + 1) / 2.0
    t = counts.astype(float)
    return mid[inverse.reshape(-1)], float(np.sum(t ** 3 - t))


def rank_with_ties(pooled: Sequence[float]) -> list[float]:
    """Mid-ranks (1-based); tied values share the mean of their positions.

    >>> rank_with_ties([3, 1, 4, 1])
    [3.0, 1.5, 4.0, 1.5]
    """
    if len(pooled) < 1:
        raise ValueError("need at least one value")
    ranks, _ = _ranks_and_ties(pooled)
    return ranks.tolist()


@dataclass(frozen=True)
class RankContext:
    """Pooled-rank summary shared by the omnibus test and its post-hoc pairs."""
    sizes: tuple[int, ...]
    rank_sums: tuple[float, ...]
    n_total: int
    tie_sum: float  # sum over tie blocks of t^3 - t

    @classmethod
    def from_groups(cls, groups: Sequence[Sequence[float]]) -> "RankContext":
        if len(groups) < 2:
            raise ValueError("need at least two groups")
        sizes = tuple(len(g) for g in groups)
        if min(sizes) < 1:
            raise ValueError("every group must be non-empty")
        pooled = np.concatenate([np.asarray(g, dtype=float) for g in groups])
        ranks, tie_sum = _ranks_and_ties(pooled)
        bounds = np.cumsum((0,) + sizes)
        sums = tuple(float(ranks[bounds[i]:bounds[i + 1]].sum()) for i in range(len(sizes)))
        return cls(sizes, sums, int(pooled.size), tie_sum)

    def mean_rank(self, i: int) -> float:
        return self.rank_sums[i] / self.sizes[i]


def kruskal_wallis(groups: Sequence[Sequence[float]], context: RankContext | None = None) -> TestResult:
    ctx = context or RankContext.from_groups(groups)
    n = ctx.n_total
    df = len(ctx.sizes) - 1
    correction = 1.0 - ctx.tie_sum / (n ** 3 - n) if n > 1 else 0.0
    if correction <= 0.0:
        return TestResult(0.0, df, 1.0, 1.0)
    s = sum(r * r / k for r, k in zip(ctx.rank_sums, ctx.sizes))
    h_raw = 12.0 / (n * (n + 1)) * s - 3.0 * (n + 1)
    h = max(0.0, h_raw / correction)
    p = chi2_sf(h, df)
    return TestResult(h, df, p, p)


def dunn_pairwise(groups: Sequence[Sequence[float]], i: int, j: int,
                  context: RankContext | None = None) -> TestResult:
    """Dunn's z for group ``i`` against group ``j`` using ranks pooled over all groups.

    ``statistic`` is the signed z; ``direction`` says whether ``i`` ranks
    higher (LONGER) or lower (SHORTER) than ``j``, before any significance
    decision.
    """
    ctx = context or RankContext.from_groups(groups)
    n = ctx.n_total
    spread = n * (n + 1) / 12.0 - ctx.tie_sum / (12.0 * (n - 1)) if n > 1 else 0.0
    var = spread * (1.0 / ctx.sizes[i] + 1.0 / ctx.sizes[j])
    if var <= 0.0:
        return TestResult(0.0, 1, 1.0, 1.0, Direction.NOT_SIGNIFICANT)
    diff = ctx.mean_rank(i) - ctx.mean_rank(j)
    z = diff / math.sqrt(var)
    p = min(1.0, 2.0 * normal_sf(abs(z)))
    direction = Direction.LONGER if diff > 0 else Direction.SHORTER
    return TestResult(z, 1, p, p, direction)


def adjust_bonferroni(p_values: Sequence[float], m: int | None = None) -> list[float]:
    m = len(p_values) if m is None else m
    if m < len(p_values):
        raise ValueError("comparison count m must cover every p-value")
    return [min(1.0, m * p) for p in p_values]


def jarque_bera(samples: Sequence[float]) -> TestResult:
    x = np.asarray(samples, dtype=float)
    n = x.size
    if n < 4:
        raise ValueError("Jarque-Bera needs at least 4 samples")
    dev = x - x.mean()
    m2 = float(np.mean(dev ** 2))
    if m2 == 0.0:
        raise ValueError("degenerate sample")
    m3 = float(np.mean(dev ** 3))
    m4 = float(np.mean(dev ** 4))
    skew = m3 / m2 ** 1.5
    kurt = m4 / m2 ** 2
    jb = n / 6.0 * (skew ** 2 + (kurt - 3.0) ** 2 / 4.0)
    p = chi2_sf(jb, 2)
    return TestResult(jb, 2, p, p)
