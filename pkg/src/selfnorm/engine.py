"""Tail-ratio tables: the continued-fraction grid and Monte Carlo sweeps.

All runs reduce integer counts across shards and divide once at the end,
so output never depends on the number of workers or on shard order.
Samples whose self-normalizing denominator vanishes are tallied in a
separate ``degenerate`` column; they stay in ``total`` and never count as
exceedances.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from . import __version__
from .blocks import BlockPlan, interlaced_sums, plan_blocks, self_norm_stat
from .bounds import Interval, mdp_rate_interval
from .contfrac import DEFAULT_PI_DIGITS, GRID_SIZE, cf_series, mu_truncated
from .errors import ConfigError, DegenerateDenominatorError, ValidationError
from .normal import quantile, survival
from .rng import stream

TABLE_THRESHOLDS = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 1.2, 1.4)
CSV_COLUMNS = ("m", "k", "t", "count", "total", "empirical", "survival", "ratio", "degenerate")
SHARD_SIZE = 1000


def resolve_workers(workers: Optional[int] = None) -> int:
    """Explicit value, else ``$SELFNORM_THREADS``, else the CPU count."""
    if workers is None:
        env = os.environ.get("SELFNORM_THREADS")
        if env:
            try:
                workers = int(env)
            except ValueError:
                raise ConfigError(f"SELFNORM_THREADS must be an integer, got {env!r}") from None
        else:
            workers = os.cpu_count() or 1
    if workers < 1:
        raise ConfigError("worker count must be >= 1")
    return workers


def _map_shards(fn: Callable, shards: Sequence, workers: int) -> list:
    if workers == 1 or len(shards) <= 1:
        return [fn(s) for s in shards]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, shards))


def wilson_interval(count: int, total: int, level: float = 0.95) -> Tuple[float, float]:
    if total <= 0:
        return (0.0, 1.0)
    z = quantile(0.5 + level / 2.0)
    p = count / total
    denom = 1.0 + z * z / total
    center = (p + z * z / (2 * total)) / denom
    half = z * math.sqrt(p * (1 - p) / total + z * z / (4 * total * total)) / denom
    lo = 0.0 if count == 0 else max(0.0, center - half)
    hi = 1.0 if count == total else min(1.0, center + half)
    return (lo, hi)


def clopper_pearson_upper_zero(total: int, level: float = 0.95) -> float:
    """One-sided upper confidence bound on a probability after 0 events in ``total`` trials."""
    return 1.0 - (1.0 - level) ** (1.0 / total)


# ---------------------------------------------------------------------------
# Ratio tables
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RowKey:
    label: str
    m: int
    k: int


@dataclass(frozen=True)
class Cell:
    count: int
    total: int
    empirical: float
    survival: float
    ratio: float
    wilson: Tuple[float, float]


@dataclass(frozen=True)
class RatioTable:
    rows: Tuple[RowKey, ...]
    thresholds: Tuple[float, ...]
    counts: Tuple[Tuple[int, ...], ...]
    degenerate: Tuple[int, ...]
    total: int
    metadata: dict = field(default_factory=dict, compare=False)

    def cell(self, row: int, col: int) -> Cell:
        count = self.counts[row][col]
        emp = count / self.total
        sf = survival(self.thresholds[col])
        return Cell(count, self.total, emp, sf, emp / sf, wilson_interval(count, self.total))

    def ratio(self, m: int, t: float) -> float:
        r = next(i for i, key in enumerate(self.rows) if key.m == m)
        c = next(j for j, th in enumerate(self.thresholds) if th == t)
        return self.cell(r, c).ratio

    def ratios(self) -> np.ndarray:
        return np.array([[self.cell(i, j).ratio for j in range(len(self.thresholds))] for i in range(len(self.rows))])

    def merge(self, other: "RatioTable") -> "RatioTable":
        """Pool two tables over disjoint samples (same rows and thresholds)."""
        if self.rows != other.rows or self.thresholds != other.thresholds:
            raise ConfigError("tables differ in rows or thresholds")
        counts = tuple(tuple(a + b for a, b in zip(r1, r2)) for r1, r2 in zip(self.counts, other.counts))
        degenerate = tuple(a + b for a, b in zip(self.degenerate, other.degenerate))
        return RatioTable(self.rows, self.thresholds, counts, degenerate, self.total + other.total, dict(self.metadata))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for i, key in enumerate(self.rows):
            for j, t in enumerate(self.thresholds):
                c = self.cell(i, j)
                w.writerow([key.m, key.k, repr(float(t)), c.count, c.total,
                            repr(c.empirical), repr(c.survival), repr(c.ratio), self.degenerate[i]])
        return buf.getvalue()

    def to_json(self) -> str:
        cells = []
        for i, key in enumerate(self.rows):
            for j, t in enumerate(self.thresholds):
                c = self.cell(i, j)
                cells.append({
                    "label": key.label, "m": key.m, "k": key.k, "t": float(t),
                    "count": c.count, "total": c.total, "empirical": c.empirical,
                    "survival": c.survival, "ratio": c.ratio,
                    "wilson_lo": c.wilson[0], "wilson_hi": c.wilson[1],
                    "degenerate": self.degenerate[i],
                })
        doc = {"metadata": self.metadata, "thresholds": [float(t) for t in self.thresholds], "cells": cells}
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_csv(cls, text: str) -> "RatioTable":
        reader = csv.DictReader(io.StringIO(text))
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise ValidationError(f"expected CSV columns {','.join(CSV_COLUMNS)}")
        rows: List[RowKey] = []
        thresholds: List[float] = []
        counts: dict = {}
        degenerate: dict = {}
        total = None
        try:
            for rec in reader:
                key = RowKey(f"m={int(rec['m'])}", int(rec["m"]), int(rec["k"]))
                t = float(rec["t"])
                if key not in counts:
                    rows.append(key)
                    counts[key] = []
                    degenerate[key] = int(rec["degenerate"])
                if len(rows) == 1:
                    thresholds.append(t)
                counts[key].append(int(rec["count"]))
                if total is None:
                    total = int(rec["total"])
                elif int(rec["total"]) != total:
                    raise ValidationError("inconsistent totals in CSV")
        except (KeyError, ValueError) as exc:
            raise ValidationError(f"malformed ratio CSV: {exc}") from None
        if not rows or any(len(counts[k]) != len(thresholds) for k in rows):
            raise ValidationError("ratio CSV is empty or ragged")
        return cls(tuple(rows), tuple(thresholds), tuple(tuple(counts[k]) for k in rows),
                   tuple(degenerate[k] for k in rows), total, {})


def _count(w: float, thresholds: Sequence[float], out: List[int]) -> None:
    for j, t in enumerate(thresholds):
        if w >= t:
            out[j] += 1


def _statistic(y: np.ndarray, center: float, denominator: str) -> float:
    if denominator == "centered":
        return self_norm_stat(y, center)
    # Raw variant: centered numerator over the uncentered sum of squares.
    ss = math.fsum(y * y)
    if ss == 0.0:
        raise DegenerateDenominatorError("all block sums are zero")
    return math.fsum(y - center) / math.sqrt(ss)


# ---------------------------------------------------------------------------
# Continued-fraction grid
# ---------------------------------------------------------------------------

def run_cf_table(
    n: int = 30,
    m_list: Sequence[int] = (1, 2, 3, 4),
    t_list: Sequence[float] = TABLE_THRESHOLDS,
    grid: Optional[Sequence[int]] = None,
    J: int = 300,
    exponent: float = 1 / 3,
    pi_digits: int = DEFAULT_PI_DIGITS,
    denominator: str = "centered",
    workers: Optional[int] = 1,
) -> RatioTable:
    """Tail ratios of the centered statistic over the ``i * pi / 10000`` grid.

    For each grid point the first ``n`` partial quotients give observations
    ``a_i ** exponent``; each block length ``m`` is centered at ``m * mu``
    with ``mu = mu_truncated(J, exponent)``. Fully deterministic.
    """
    if denominator not in ("centered", "raw"):
        raise ConfigError("denominator must be 'centered' or 'raw'")
    grid = list(range(1, GRID_SIZE + 1)) if grid is None else [int(i) for i in grid]
    if not grid:
        raise ConfigError("grid is empty")
    thresholds = tuple(float(t) for t in t_list)
    plans = [plan_blocks(n, m=m) for m in m_list]
    mu = mu_truncated(J, exponent)
    workers = resolve_workers(workers)

    def shard(indices):
        counts = [[0] * len(thresholds) for _ in plans]
        deg = [0] * len(plans)
        for idx in indices:
            z = cf_series(idx, n, exponent, pi_digits)
            for r, plan in enumerate(plans):
                y = interlaced_sums(z, plan).y
                try:
                    w = _statistic(y, plan.m * mu, denominator)
                except DegenerateDenominatorError:
                    deg[r] += 1
                    continue
                _count(w, thresholds, counts[r])
        return counts, deg

    size = max(1, -(-len(grid) // (4 * workers)))
    shards = [grid[i:i + size] for i in range(0, len(grid), size)]
    counts, deg = _reduce(_map_shards(shard, shards, workers), len(plans), len(thresholds))
    meta = {
        "mode": "cf-grid", "n": n, "grid_size": len(grid), "grid_first": grid[0], "grid_last": grid[-1],
        "J": J, "exponent": exponent, "mu": mu, "pi_digits": pi_digits,
        "denominator": denominator, "engine_version": __version__,
    }
    rows = tuple(RowKey(f"m={p.m}", p.m, p.k) for p in plans)
    return RatioTable(rows, thresholds, counts, deg, len(grid), meta)


def _reduce(parts, n_rows: int, n_cols: int):
    counts = [[0] * n_cols for _ in range(n_rows)]
    deg = [0] * n_rows
    for c, d in parts:
        for r in range(n_rows):
            deg[r] += d[r]
            for j in range(n_cols):
                counts[r][j] += c[r][j]
    return tuple(tuple(r) for r in counts), tuple(deg)


# ---------------------------------------------------------------------------
# Monte Carlo
# ---------------------------------------------------------------------------

def _block_sums(source, plan: BlockPlan, rng: np.random.Generator, exact_blocks: bool) -> np.ndarray:
    if exact_blocks:
        if not hasattr(source, "exact_block_sums"):
            raise ConfigError(f"source {source.kind!r} has no exact block-sum law")
        return source.exact_block_sums(plan.m, plan.k, rng)
    return interlaced_sums(source.sample(plan.n, rng), plan).y


def _shards(first: int, count: int) -> List[range]:
    return [range(s, min(s + SHARD_SIZE, first + count)) for s in range(first, first + count, SHARD_SIZE)]


def run_mc(
    source,
    plan: BlockPlan,
    t_list: Sequence[float],
    replicates: int,
    seed: int,
    center: str = "known",
    workers: Optional[int] = 1,
    replicate_offset: int = 0,
    exact_blocks: bool = False,
) -> RatioTable:
    """Monte Carlo tail ratios for ``W`` built from ``source``.

    Replicate ``i`` (counting from ``replicate_offset``) draws from
    ``stream(seed, i)``, so tables over disjoint replicate ranges can be
    merged exactly. ``center`` is ``"known"`` (subtract ``m`` times the
    source mean) or ``"none"``. ``exact_blocks`` samples the retained block
    sums from their exact law instead of simulating the full series, for
    sources that provide one.
    """
    if replicates < 1000:
        raise ConfigError("need at least 1000 replicates")
    if center not in ("known", "none"):
        raise ConfigError("center must be 'known' or 'none'")
    if plan.n < plan.used_length:
        raise ConfigError("plan does not fit in the series length")
    thresholds = tuple(float(t) for t in t_list)
    c = plan.m * source.mean if center == "known" else 0.0
    workers = resolve_workers(workers)

    def shard(reps):
        counts = [0] * len(thresholds)
        deg = 0
        for i in reps:
            y = _block_sums(source, plan, stream(seed, i), exact_blocks)
            try:
                w = self_norm_stat(y, c)
            except DegenerateDenominatorError:
                deg += 1
                continue
            _count(w, thresholds, counts)
        return [counts], [deg]

    counts, deg = _reduce(_map_shards(shard, _shards(replicate_offset, replicates), workers), 1, len(thresholds))
    meta = {
        "mode": "monte-carlo", "n": plan.n, "m": plan.m, "k": plan.k, "alpha": plan.alpha,
        "source": source.describe(), "seed": seed, "replicates": replicates,
        "replicate_offset": replicate_offset, "center": center, "exact_blocks": exact_blocks,
        "engine_version": __version__,
    }
    return RatioTable((RowKey(source.kind, plan.m, plan.k),), thresholds, counts, deg, replicates, meta)


# ---------------------------------------------------------------------------
# Moderate deviation sweep
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MdpPoint:
    n: int
    m: int
    k: int
    a_n: float
    count: int
    total: int
    degenerate: int
    scaled_log: float
    cp_upper: Optional[float]

    @property
    def frequency(self) -> float:
        return self.count / self.total


@dataclass(frozen=True)
class MdpReport:
    points: Tuple[MdpPoint, ...]
    lower_target: float
    upper_target: float
    metadata: dict = field(default_factory=dict, compare=False)

    @property
    def interior_empty(self) -> bool:
        return self.lower_target == -math.inf

    def distances(self) -> List[float]:
        """Distance of each scaled log-frequency from ``[lower_target, upper_target]``."""
        out = []
        for p in self.points:
            v = p.scaled_log
            if v == -math.inf:
                out.append(math.inf)
            else:
                out.append(max(0.0, self.lower_target - v, v - self.upper_target))
        return out

    def trend(self) -> dict:
        d = self.distances()
        steps = [b - a for a, b in zip(d, d[1:])]
        if d[-1] < d[0]:
            direction = "toward"
        elif d[-1] > d[0]:
            direction = "away"
        else:
            direction = "flat"
        return {"distances": d, "monotone_toward": all(s < 0 for s in steps), "direction": direction}

    def to_json(self) -> str:
        doc = {
            "metadata": self.metadata,
            "lower_target": self.lower_target,
            "upper_target": self.upper_target,
            "interior_empty": self.interior_empty,
            "trend": self.trend(),
            "points": [dict(p.__dict__, frequency=p.frequency) for p in self.points],
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("n", "m", "k", "a_n", "count", "total", "degenerate", "frequency", "scaled_log",
                    "cp_upper", "lower_target", "upper_target"))
        for p in self.points:
            w.writerow([p.n, p.m, p.k, repr(p.a_n), p.count, p.total, p.degenerate, repr(p.frequency),
                        repr(p.scaled_log), "" if p.cp_upper is None else repr(p.cp_upper),
                        repr(self.lower_target), repr(self.upper_target)])
        return buf.getvalue()


def _contains(B: Sequence[Interval], x: float) -> bool:
    for iv in B:
        above = x >= iv.lo if iv.lo_closed else x > iv.lo
        below = x <= iv.hi if iv.hi_closed else x < iv.hi
        if above and below:
            return True
    return False


def run_mdp_sweep(
    source,
    B: Sequence[Interval],
    n_list: Sequence[int],
    alpha: float,
    replicates: int,
    seed: int,
    a_exponent: Optional[float] = None,
    a_values: Optional[Sequence[float]] = None,
    workers: Optional[int] = 1,
    exact_blocks: bool = False,
) -> MdpReport:
    """Scaled log-frequencies ``log P(W / a_n in B) / a_n**2`` along ``n_list``.

    The scale is ``a_n = n ** a_exponent`` or given explicitly as ``a_values``.
    The schedule must increase while ``a_n / n**((1-alpha)/2)`` decreases.
    Sample size ``n_list[j]`` uses streams ``stream(seed, j, i)``.
    """
    n_list = [int(n) for n in n_list]
    if len(n_list) < 2 or any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ConfigError("n_list needs at least two strictly increasing sizes")
    if (a_exponent is None) == (a_values is None):
        raise ConfigError("give exactly one of a_exponent or a_values")
    a_list = [n ** a_exponent for n in n_list] if a_values is None else [float(a) for a in a_values]
    if len(a_list) != len(n_list):
        raise ConfigError("a_values must match n_list")
    rel = [a / n ** ((1.0 - alpha) / 2.0) for a, n in zip(a_list, n_list)]
    if any(b <= a for a, b in zip(a_list, a_list[1:])) or any(b >= a for a, b in zip(rel, rel[1:])):
        raise ConfigError("schedule must have a_n increasing and a_n / n^((1-alpha)/2) decreasing")
    if replicates < 1000:
        raise ConfigError("need at least 1000 replicates")
    workers = resolve_workers(workers)
    lower = -mdp_rate_interval(B, "interior")
    upper = -mdp_rate_interval(B, "closure")

    points = []
    for j, (n, a) in enumerate(zip(n_list, a_list)):
        plan = plan_blocks(n, alpha=alpha)
        c = plan.m * source.mean

        def shard(reps, j=j, a=a, plan=plan, c=c):
            hit = deg = 0
            for i in reps:
                y = _block_sums(source, plan, stream(seed, j, i), exact_blocks)
                try:
                    w = self_norm_stat(y, c)
                except DegenerateDenominatorError:
                    deg += 1
                    continue
                hit += _contains(B, w / a)
            return hit, deg

        parts = _map_shards(shard, _shards(0, replicates), workers)
        hit = sum(p[0] for p in parts)
        deg = sum(p[1] for p in parts)
        if hit:
            scaled, cp = math.log(hit / replicates) / (a * a), None
        else:
            scaled, cp = -math.inf, clopper_pearson_upper_zero(replicates)
        points.append(MdpPoint(n, plan.m, plan.k, a, hit, replicates, deg, scaled, cp))
    meta = {
        "mode": "mdp", "alpha": alpha, "B": " U ".join(str(iv) for iv in B), "seed": seed,
        "replicates": replicates, "a_exponent": a_exponent, "source": source.describe(),
        "exact_blocks": exact_blocks, "engine_version": __version__,
    }
    return MdpReport(tuple(points), lower, upper, meta)
