"""Two-sample t statistic with pooled standard deviation and a fixed-critical-value decision.

The pooled SD here is ``sqrt((SD1**2 + SD2**2) / n)`` for two samples of
the same size ``n``. For equal sizes this coincides with the classic
Student pooled-variance statistic; :func:`student_t_test` handles unequal
sizes and is never substituted silently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

CRITICAL_T_005 = 1.645


@dataclass(frozen=True)
class SampleStats:
    values: tuple = field(repr=False)
    n: int = 0
    mean: float = 0.0
    sd: float = 0.0

    @classmethod
    def from_values(cls, values: Sequence[float]) -> "SampleStats":
        v = np.asarray(values, dtype=np.float64).ravel()
        if v.size < 2:
            raise ValueError("a sample needs at least 2 values")
        if not np.all(np.isfinite(v)):
            raise ValueError("sample contains non-finite values")
        return cls(tuple(float(x) for x in v), int(v.size), float(v.mean()), float(v.std(ddof=1)))


@dataclass(frozen=True)
class TTestResult:
    t_value: float
    critical_value: float = CRITICAL_T_005
    pooled_sd: float = float("nan")

    @property
    def significant(self) -> bool:
        return decide(self.t_value, self.critical_value)


def decide(t_value: float, critical: float = CRITICAL_T_005) -> bool:
    """One-tailed decision: significant iff ``t > critical``."""
    return t_value > critical


def _as_stats(sample) -> SampleStats:
    return sample if isinstance(sample, SampleStats) else SampleStats.from_values(sample)


def _ratio(diff: float, spread: float) -> float:
    if spread == 0.0:
        if diff == 0.0:
            return 0.0
        return math.copysign(math.inf, diff)
    return diff / spread


def t_test(sample1, sample2, critical: float = CRITICAL_T_005) -> TTestResult:
    """``t = (mean1 - mean2) / sqrt((SD1**2 + SD2**2) / n)`` for equal-size samples."""
    s1, s2 = _as_stats(sample1), _as_stats(sample2)
    if s1.n != s2.n:
        raise ValueError(f"samples must have the same size, got {s1.n} and {s2.n}")
    pooled = math.sqrt((s1.sd**2 + s2.sd**2) / s1.n)
    return TTestResult(_ratio(s1.mean - s2.mean, pooled), critical, pooled)


def student_t_test(sample1, sample2, critical: float = CRITICAL_T_005) -> TTestResult:
    """Classic pooled-variance Student t, valid for unequal sample sizes."""
    s1, s2 = _as_stats(sample1), _as_stats(sample2)
    dof = s1.n + s2.n - 2
    var = ((s1.n - 1) * s1.sd**2 + (s2.n - 1) * s2.sd**2) / dof
    spread = math.sqrt(var * (1.0 / s1.n + 1.0 / s2.n))
    return TTestResult(_ratio(s1.mean - s2.mean, spread), critical, math.sqrt(var))
