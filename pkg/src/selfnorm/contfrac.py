"""Exact continued fractions and Gauss-measure quantities.

Grid points ``i * pi / 10000`` are exact rationals built from a truncated
decimal expansion of pi, and their digits come from integer Euclidean
division, so no floating-point error enters the digit sequence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import List, Sequence

import mpmath
import numpy as np

from .errors import DomainError, PrecisionError

GRID_SIZE = 3182
GRID_SCALE = 10000

# pi truncated to 300 decimals; the default grid uses the first 200.
_PI_300 = (
    "3.14159265358979323846264338327950288419716939937510582097494459230781640628"
    "62089986280348253421170679821480865132823066470938446095505822317253594081284"
    "81117450284102701938521105559644622948954930381964428810975665933446128475648"
    "233786783165271201909145648566923460348610454326648213393607260249141273"
)
DEFAULT_PI_DIGITS = 200


@dataclass(frozen=True)
class CfDigits:
    digits: tuple
    terminated: bool

    def __len__(self):
        return len(self.digits)


@lru_cache(maxsize=None)
def pi_rational(decimals: int = DEFAULT_PI_DIGITS) -> Fraction:
    """pi truncated to ``decimals`` places after the point, as an exact rational."""
    if not 1 <= decimals <= 300:
        raise DomainError("pi is embedded to at most 300 decimals")
    return Fraction(_PI_300[: 2 + decimals])


def _check_unit(x: Fraction) -> Fraction:
    x = Fraction(x)
    if not 0 < x < 1:
        raise DomainError(f"x must lie in (0, 1), got {x}")
    return x


def cf_digits(x: Fraction, max_terms: int) -> CfDigits:
    """Partial quotients ``a_1, a_2, ...`` of ``x`` in (0, 1) by Euclid's algorithm."""
    x = _check_unit(x)
    if max_terms < 1:
        raise DomainError("max_terms must be positive")
    p, q = x.numerator, x.denominator
    out = []
    while p and len(out) < max_terms:
        a, r = divmod(q, p)
        out.append(a)
        q, p = p, r
    return CfDigits(digits=tuple(out), terminated=p == 0)


def gauss_map(x: Fraction) -> Fraction:
    """``T(x) = 1/x - floor(1/x)`` on exact rationals."""
    inv = 1 / Fraction(x)
    return inv - math.floor(inv)


def gauss_map_digits(x: Fraction, max_terms: int) -> CfDigits:
    """Same digits as :func:`cf_digits`, by iterating :func:`gauss_map` directly."""
    x = _check_unit(x)
    out = []
    while x and len(out) < max_terms:
        out.append(math.floor(1 / x))
        x = gauss_map(x)
    return CfDigits(digits=tuple(out), terminated=x == 0)


def reconstruct(digits: Sequence[int]) -> Fraction:
    """Fold ``[a_1, ..., a_r]`` back into ``1/(a_1 + 1/(a_2 + ...))``."""
    if not digits:
        raise DomainError("need at least one digit")
    value = Fraction(0)
    for a in reversed(digits):
        value = 1 / (a + value)
    return value


def gauss_mass(j: int) -> float:
    """Gauss measure of ``{a_1 = j}``: ``log(1 + 1/(j(j+2))) / log 2``."""
    if j < 1:
        raise DomainError("j must be >= 1")
    return math.log1p(1.0 / (j * (j + 2))) / math.log(2.0)


def gauss_partial_sum(J: int) -> float:
    """Sum of :func:`gauss_mass` over ``j <= J``, term by term."""
    if J < 1:
        raise DomainError("J must be >= 1")
    return math.fsum(gauss_mass(j) for j in range(1, J + 1))


def gauss_partial_sum_closed(J: int) -> float:
    """Telescoped form ``log(2(J+1)/(J+2)) / log 2`` of :func:`gauss_partial_sum`."""
    if J < 1:
        raise DomainError("J must be >= 1")
    return math.log(2.0 * (J + 1) / (J + 2)) / math.log(2.0)


def mu_truncated(J: int = 300, exponent: float = 1 / 3) -> float:
    """Truncated Gauss-measure mean of ``a_1 ** exponent`` over ``j <= J``.

    Summed at 40 significant digits, then rounded to a float.
    """
    if J < 1:
        raise DomainError("J must be >= 1")
    if not 0 <= exponent < 1:
        raise DomainError("exponent must lie in [0, 1)")
    with mpmath.workdps(40):
        e = mpmath.mpf(exponent)
        total = mpmath.fsum(
            mpmath.power(j, e) * mpmath.log1p(mpmath.mpf(1) / (j * (j + 2))) for j in range(1, J + 1)
        )
        return float(total / mpmath.log(2))


def pi_grid_point(index: int, pi_digits: int = DEFAULT_PI_DIGITS) -> Fraction:
    """``index * pi / 10000`` with pi truncated to ``pi_digits`` decimals."""
    if isinstance(index, bool) or int(index) != index or not 1 <= index <= GRID_SIZE:
        raise DomainError(f"grid index must be in [1, {GRID_SIZE}], got {index!r}")
    return int(index) * pi_rational(pi_digits) / GRID_SCALE


def cf_series(index: int, n: int, exponent: float = 1 / 3, pi_digits: int = DEFAULT_PI_DIGITS) -> np.ndarray:
    """Uncentered observations ``a_i(x) ** exponent``, ``i = 1..n``, at a grid point.

    Raises :class:`PrecisionError` if the rational expansion ends before ``n``
    digits; it is never padded.
    """
    cf = cf_digits(pi_grid_point(index, pi_digits), n)
    if len(cf) < n:
        raise PrecisionError(f"grid point {index} has only {len(cf)} digits, need {n}")
    return np.array(cf.digits, dtype=float) ** exponent
