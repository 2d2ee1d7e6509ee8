"""Standard normal upper tail, its inverse, and tail-ratio diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError

_INV_SQRT2 = 0.7071067811865476
_INV_SQRT2PI = 0.3989422804014327


@dataclass(frozen=True)
class TailRatio:
    threshold: float
    empirical: float
    survival: float
    ratio: float
    log_ratio: float


def survival(x: float) -> float:
    """Upper tail ``1 - Phi(x)``.

    Evaluated as ``erfc(x / sqrt(2)) / 2`` with the C library ``erfc``
    (fdlibm-derived rational approximations on subintervals plus an
    ``exp(-z*z)``-scaled continued-fraction-type tail). Relative accuracy is
    a few ulps times ``x**2`` on ``|x| <= 8``; the result underflows to 0
    only beyond ``x ~ 38``.
    """
    if not math.isfinite(x):
        raise DomainError(f"x must be finite, got {x!r}")
    return 0.5 * math.erfc(x * _INV_SQRT2)


def density(x: float) -> float:
    return _INV_SQRT2PI * math.exp(-0.5 * x * x)


def _upper_root(q: float) -> float:
    """Solve ``survival(z) == q`` for ``0 < q < 0.5`` (so ``z > 0``)."""
    lo, hi = 0.0, 40.0
    target = math.log(q)
    z = min(math.sqrt(-2.0 * target), hi)
    for _ in range(200):
        s = survival(z)
        if s == 0.0:
            hi = z
            z = 0.5 * (lo + hi)
            continue
        f = math.log(s) - target
        if f > 0:
            lo = z
        elif f < 0:
            hi = z
        else:
            return z
        # d/dz log(survival) = -density/survival
        step = f * s / density(z)
        z_new = z + step
        if not lo < z_new < hi:
            z_new = 0.5 * (lo + hi)
        if abs(z_new - z) <= 1e-16 * max(1.0, z) or hi - lo <= 4e-16 * hi:
            return z_new
        z = z_new
    return z


def quantile(p: float) -> float:
    """Inverse CDF, ``Phi^{-1}(p)``, found by safeguarded Newton on :func:`survival`."""
    if not 0.0 < p < 1.0:
        raise DomainError(f"p must lie in (0, 1), got {p!r}")
    if p == 0.5:
        return 0.0
    if p > 0.5:
        return _upper_root(1.0 - p)
    return -_upper_root(p)


def log_ratio(empirical: float, x: float) -> TailRatio:
    """Compare an empirical tail frequency with ``survival(x)``.

    ``log_ratio`` is ``-inf`` when ``empirical == 0``.
    """
    if not 0.0 <= empirical <= 1.0:
        raise DomainError(f"empirical probability out of range: {empirical!r}")
    sf = survival(x)
    ratio = empirical / sf
    lr = math.log(ratio) if ratio > 0 else -math.inf
    return TailRatio(threshold=x, empirical=empirical, survival=sf, ratio=ratio, log_ratio=lr)
