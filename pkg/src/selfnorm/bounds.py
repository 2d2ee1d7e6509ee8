"""Closed-form bound expressions.

The moderate-deviation bound on ``|log P(W >= x) / (1 - Phi(x))|`` carries
an unspecified constant; it is exposed here as a parameter (default 1) so
that the shape of the bound can be evaluated and compared with data.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterable, List, NamedTuple, Optional, Sequence, Tuple

from .blocks import BlockPlan, plan_blocks
from .errors import DomainError, IntervalParseError, ValidationError
from .sources import MixingProfile


@dataclass(frozen=True)
class MixingRates:
    delta_n: float
    gamma_n: float
    m: int
    k: int


@dataclass(frozen=True)
class BoundConfig:
    n: int
    alpha: float
    rho: float
    profile: Optional[MixingProfile] = None  # None means psi == 0
    c: float = 1.0

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValidationError("alpha must lie in (0, 1)")
        if not 0 < self.rho <= 1:
            raise ValidationError("rho must lie in (0, 1]")
        if not self.c > 0:
            raise ValidationError("constant must be positive")

    @property
    def plan(self) -> BlockPlan:
        return plan_blocks(self.n, alpha=self.alpha)

    @property
    def range_limit(self) -> float:
        """``n ** ((1 - alpha) / 2)``: the bound is meaningful for x well below it."""
        return self.n ** ((1.0 - self.alpha) / 2.0)


class BoundValue(NamedTuple):
    value: float
    in_range: bool


def mixing_rates(plan: BlockPlan, profile: MixingProfile) -> MixingRates:
    """``delta_n = sqrt(m psi(m)^2 + k psi(m))`` and ``gamma_n = sqrt(k psi(m)) + n psi(m)``."""
    psi = profile(plan.m)
    m, k, n = plan.m, plan.k, plan.n
    delta = math.sqrt(m * psi * psi + k * psi)
    gamma = math.sqrt(k) * math.sqrt(psi) + n * psi
    return MixingRates(delta_n=delta, gamma_n=gamma, m=m, k=k)


def cmd_bound(x: float, cfg: BoundConfig) -> BoundValue:
    """Evaluate the relative-error bound at ``x`` (constant included).

    For ``rho < 1``::

        c * ( x^(2+rho) / n^((1-a) rho/2) + x^2 delta^2
              + (1+x) * ( 1 / (n^((1-a) rho (2-rho)/8) (1 + x^(rho(2+rho)/4))) + gamma ) )

    For ``rho == 1`` the middle power term becomes ``x^3 / n^((1-a)/2)`` and
    ``log(n) / n^((1-a)/2)`` joins the last bracket. ``in_range`` is false
    once ``x >= n^((1-a)/2)``.
    """
    if x < 0:
        raise DomainError("x must be nonnegative")
    n, a, rho = cfg.n, cfg.alpha, cfg.rho
    plan = cfg.plan
    if cfg.profile is None:
        rates = MixingRates(0.0, 0.0, plan.m, plan.k)
    else:
        rates = mixing_rates(plan, cfg.profile)
    d2 = rates.delta_n ** 2
    lead = x ** (2.0 + rho) / n ** ((1.0 - a) * rho / 2.0)
    edge = 1.0 / (n ** ((1.0 - a) * rho * (2.0 - rho) / 8.0) * (1.0 + x ** (rho * (2.0 + rho) / 4.0)))
    tail = edge + rates.gamma_n
    if rho == 1.0:
        tail += math.log(n) / n ** ((1.0 - a) / 2.0)
    value = cfg.c * (lead + x * x * d2 + (1.0 + x) * tail)
    return BoundValue(value, x < cfg.range_limit)


def psi_rate_check(profile: MixingProfile, alpha: float, rho: float) -> dict:
    """Ratios ``psi(n) / n^(-(1+rho)/alpha)`` for each tabulated gap.

    Bounded ratios are consistent with the polynomial decay assumption under
    which the mixing terms become negligible; nothing is enforced.
    """
    power = (1.0 + rho) / alpha
    return {n: v * n ** power for n, v in sorted(profile.psi.items())}


def fan_constant(beta: float) -> float:
    """``C(beta) = beta^(1/(1-beta)) * (1 - 1/beta)``."""
    if not 1 < beta <= 2:
        raise DomainError(f"beta must lie in (1, 2], got {beta!r}")
    return beta ** (1.0 / (1.0 - beta)) * (1.0 - 1.0 / beta)


def fan_exp_bound(x: float, v: float, beta: float) -> float:
    """``exp(-C(beta) (x/v)^(beta/(beta-1)))``."""
    if not (x > 0 and v > 0):
        raise DomainError("x and v must be positive")
    C = fan_constant(beta)
    return math.exp(-C * (x / v) ** (beta / (beta - 1.0)))


# ---------------------------------------------------------------------------
# Interval sets and the rate function x^2/2
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float
    lo_closed: bool = True
    hi_closed: bool = True

    def __post_init__(self):
        if math.isnan(self.lo) or math.isnan(self.hi):
            raise IntervalParseError("interval endpoints must not be NaN")
        if self.lo > self.hi:
            raise IntervalParseError(f"empty interval with lo={self.lo} > hi={self.hi}")
        if (self.lo_closed and math.isinf(self.lo)) or (self.hi_closed and math.isinf(self.hi)):
            raise IntervalParseError("infinite endpoints must be open")
        if self.lo == self.hi and not (self.lo_closed and self.hi_closed):
            raise IntervalParseError("degenerate interval must be closed on both sides")

    def __str__(self):
        def fmt(v):
            return "inf" if v == math.inf else "-inf" if v == -math.inf else repr(v)
        return f"{'[' if self.lo_closed else '('}{fmt(self.lo)},{fmt(self.hi)}{']' if self.hi_closed else ')'}"


_INTERVAL_RE = re.compile(r"^\s*([\[(])\s*([^,\s]+)\s*,\s*([^,\s]+)\s*([\])])\s*$")


def parse_intervals(text: str) -> List[Interval]:
    """Parse ``"[1,2] U (3,inf)"``-style unions (separator ``U`` or ``|``)."""
    parts = [p for p in re.split(r"\s*(?:\bU\b|\|)\s*", text.strip()) if p]
    if not parts:
        raise IntervalParseError("no intervals given")
    out = []
    for part in parts:
        match = _INTERVAL_RE.match(part)
        if not match:
            raise IntervalParseError(f"cannot parse interval {part!r}")
        lb, lo, hi, rb = match.groups()
        try:
            lo_v, hi_v = float(lo), float(hi)
        except ValueError:
            raise IntervalParseError(f"bad endpoint in {part!r}") from None
        out.append(Interval(lo_v, hi_v, lb == "[", rb == "]"))
    return out


def _merge(intervals: Sequence[Interval]) -> List[Interval]:
    items = sorted(intervals, key=lambda iv: (iv.lo, not iv.lo_closed))
    merged: List[Interval] = []
    for iv in items:
        if merged:
            last = merged[-1]
            touches = iv.lo < last.hi or (iv.lo == last.hi and (iv.lo_closed or last.hi_closed))
            if touches:
                if iv.hi > last.hi:
                    merged[-1] = Interval(last.lo, iv.hi, last.lo_closed, iv.hi_closed)
                elif iv.hi == last.hi and iv.hi_closed:
                    merged[-1] = Interval(last.lo, last.hi, last.lo_closed, True)
                continue
        merged.append(iv)
    return merged


def _inf_half_square(components: Iterable[Tuple[float, float]]) -> float:
    best = math.inf
    for lo, hi in components:
        if lo <= 0 <= hi:
            return 0.0
        d = lo if lo > 0 else -hi
        best = min(best, 0.5 * d * d)
    return best


def mdp_rate_interval(B: Sequence[Interval], which: str) -> float:
    """``inf x^2/2`` over the interior or closure of a union of intervals (``inf`` if empty)."""
    if which not in ("interior", "closure"):
        raise ValidationError("which must be 'interior' or 'closure'")
    if not B:
        raise IntervalParseError("interval list is empty")
    merged = _merge(list(B))
    if which == "closure":
        return _inf_half_square((iv.lo, iv.hi) for iv in merged)
    return _inf_half_square((iv.lo, iv.hi) for iv in merged if iv.lo < iv.hi)
