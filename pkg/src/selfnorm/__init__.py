"""Interlaced self-normalized sums for psi-mixing sequences."""

__version__ = "0.1.0"

from .blocks import (
    BlockPlan,
    BlockSums,
    IntervalEstimate,
    chung_threshold,
    confidence_interval,
    interlaced_sums,
    plan_blocks,
    self_norm_stat,
    student_stat,
)
from .normal import TailRatio, log_ratio, quantile, survival

__all__ = [
    "BlockPlan",
    "BlockSums",
    "IntervalEstimate",
    "TailRatio",
    "chung_threshold",
    "confidence_interval",
    "interlaced_sums",
    "log_ratio",
    "plan_blocks",
    "quantile",
    "self_norm_stat",
    "student_stat",
    "survival",
]
