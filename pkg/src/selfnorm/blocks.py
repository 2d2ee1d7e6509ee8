"""Interlaced block sums and the statistics built on them.

A series of length ``n`` is cut into consecutive blocks of length ``m``;
only every other block is kept, so the retained blocks are separated by a
discarded gap block of the same length::

    kept   gap    kept   gap   ...
    [0,m)  [m,2m) [2m,3m) ...

The ``k = n // (2m)`` retained block sums ``Y_1..Y_k`` feed the
self-normalized statistic ``sum(Z) / sqrt(sum(Z**2))`` with
``Z_j = Y_j - c`` and the Studentized statistic ``T``.

Sums of ``Z`` and ``Z**2`` use :func:`math.fsum` (exactly rounded), which
makes every statistic independent of summation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence, Union

import mpmath
import numpy as np

from .errors import DegenerateDenominatorError, DomainError, InvalidPlanError, SeriesLengthError
from .normal import quantile

# Relative distance to an integer below which n**alpha snaps to it, so that
# alpha=1/3, n=1000 yields m=10 rather than 9.
_SNAP_RTOL = 1e-12


@dataclass(frozen=True)
class BlockPlan:
    n: int
    m: int
    k: int
    alpha: Optional[float] = None

    @property
    def used_length(self) -> int:
        """Minimum series length that covers the last retained block."""
        return 2 * self.m * (self.k - 1) + self.m


@dataclass(frozen=True)
class BlockSums:
    y: np.ndarray
    plan: BlockPlan

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        if y.shape != (self.plan.k,):
            raise SeriesLengthError(f"expected {self.plan.k} block sums, got shape {y.shape}")
        if not np.all(np.isfinite(y)):
            raise DomainError("block sums must be finite")
        y.setflags(write=False)
        object.__setattr__(self, "y", y)

    @property
    def total(self) -> float:
        return math.fsum(self.y)

    @property
    def sum_squares(self) -> float:
        return math.fsum(self.y * self.y)


@dataclass(frozen=True)
class IntervalEstimate:
    lo: float
    hi: float
    level: float

    @property
    def center(self) -> float:
        return 0.5 * (self.lo + self.hi)


def _floor_power(n: int, alpha: Union[float, Fraction]) -> int:
    with mpmath.workdps(50):
        if isinstance(alpha, Fraction):
            a = mpmath.mpf(alpha.numerator) / alpha.denominator
        else:
            a = mpmath.mpf(alpha)
        value = mpmath.power(n, a)
        nearest = int(mpmath.nint(value))
        if abs(value - nearest) <= _SNAP_RTOL * value:
            return nearest
        return int(mpmath.floor(value))


def plan_blocks(n: int, alpha: Union[float, Fraction, None] = None, m: Optional[int] = None) -> BlockPlan:
    """Block geometry for a series of length ``n``.

    Exactly one of ``alpha`` (giving ``m = floor(n**alpha)``) or ``m`` must be
    supplied. ``k = n // (2m)`` in both cases.
    """
    if isinstance(n, bool) or int(n) != n or n < 2:
        raise InvalidPlanError(f"n must be an integer >= 2, got {n!r}")
    n = int(n)
    if (alpha is None) == (m is None):
        raise InvalidPlanError("give exactly one of alpha or m")
    if alpha is not None:
        if not 0 < alpha < 1:
            raise InvalidPlanError(f"alpha must lie in (0, 1), got {alpha!r}")
        m = _floor_power(n, alpha)
    else:
        if isinstance(m, bool) or int(m) != m or m < 1:
            raise InvalidPlanError(f"m must be a positive integer, got {m!r}")
        m = int(m)
        if 2 * m > n:
            raise InvalidPlanError(f"m={m} exceeds n/2 for n={n}")
    k = n // (2 * m)
    if k < 1:
        raise InvalidPlanError(f"n={n} is too short for block length m={m}")
    return BlockPlan(n=n, m=m, k=k, alpha=None if alpha is None else float(alpha))


def interlaced_sums(series: Sequence[float], plan: BlockPlan) -> BlockSums:
    """Sum the odd-position blocks: ``Y_j = series[2m(j-1) : 2m(j-1)+m].sum()``."""
    s = np.asarray(series, dtype=float)
    if s.ndim != 1:
        raise SeriesLengthError("series must be one-dimensional")
    m, k = plan.m, plan.k
    if s.size < plan.used_length:
        raise SeriesLengthError(f"series has {s.size} values, plan needs at least {plan.used_length}")
    if s.size < 2 * m * k:
        s = np.concatenate([s, np.zeros(2 * m * k - s.size)])
    y = s[: 2 * m * k].reshape(k, 2 * m)[:, :m].sum(axis=1)
    return BlockSums(y=y, plan=plan)


def _as_y(sums) -> np.ndarray:
    if isinstance(sums, BlockSums):
        return sums.y
    return np.asarray(sums, dtype=float)


def self_norm_stat(sums, center: Optional[float] = None) -> float:
    """``sum(Z) / sqrt(sum(Z**2))`` with ``Z = Y - center`` (center defaults to 0).

    Raises :class:`DegenerateDenominatorError` when every ``Z`` is zero.
    """
    z = _as_y(sums)
    if center:
        z = z - center
    ss = math.fsum(z * z)
    if ss == 0.0:
        raise DegenerateDenominatorError("all centered block sums are zero")
    return math.fsum(z) / math.sqrt(ss)


def student_stat(sums, block_mean: float) -> float:
    """``sum(Y - block_mean) / sqrt(sum((Y - mean(Y))**2))``."""
    y = _as_y(sums)
    k = y.size
    if k < 2:
        raise DomainError("Studentized statistic needs k >= 2")
    ybar = math.fsum(y) / k
    d = y - ybar
    ss = math.fsum(d * d)
    if ss == 0.0:
        raise DegenerateDenominatorError("block sums have zero spread")
    return math.fsum(y - block_mean) / math.sqrt(ss)


def chung_threshold(x: float, k: int) -> float:
    """Threshold ``g`` with ``{T >= x} == {W >= g}`` for the statistics above.

    Here ``T`` is :func:`student_stat` and ``W`` the centered
    :func:`self_norm_stat`, both on the same data and center. Since
    ``sum((Y - mean)**2) = sum(Z**2) - sum(Z)**2 / k`` we have
    ``T = W / sqrt(1 - W**2 / k)``, increasing in ``W``, whence
    ``g = x * sqrt(k / (k + x**2))``.
    """
    if x < 0:
        raise DomainError(f"x must be nonnegative, got {x!r}")
    if k < 2:
        raise DomainError(f"k must be >= 2, got {k!r}")
    return x * math.sqrt(k / (k + x * x))


def confidence_interval(sums: BlockSums, delta: float) -> IntervalEstimate:
    """Level ``1 - delta`` interval for the per-observation mean.

    Center is ``sum(Y) / (k m)``, half-width
    ``quantile(1 - delta/2) * sqrt(sum((Y - mean(Y))**2)) / (k m)``.
    """
    if not 0 < delta < 1:
        raise DomainError(f"delta must lie in (0, 1), got {delta!r}")
    y = sums.y
    k, m = sums.plan.k, sums.plan.m
    if k < 2:
        raise DomainError("confidence interval needs k >= 2")
    ybar = math.fsum(y) / k
    d = y - ybar
    spread = math.sqrt(math.fsum(d * d))
    center = math.fsum(y) / (k * m)
    half = quantile(1.0 - delta / 2.0) * spread / (k * m)
    return IntervalEstimate(lo=center - half, hi=center + half, level=1.0 - delta)
