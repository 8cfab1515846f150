"""Rank statistics backing the metric-selection report.

Self-contained Spearman correlation with a t-distribution p-value; the
incomplete beta function behind the t tail is evaluated with the standard
continued-fraction expansion, so there is no runtime dependency on scipy.
"""

from __future__ import annotations

import itertools
import math
import statistics
from dataclasses import dataclass

import numpy as np


class UndefinedCorrelation(ValueError):
    """Raised when a correlation has no defined value (constant input)."""


@dataclass(frozen=True)
class CorrelationResult:
    coefficient: float
    p_value: float
    n: int

    def __post_init__(self):
        if not -1.0 <= self.coefficient <= 1.0:
            raise ValueError(f"coefficient {self.coefficient} outside [-1, 1]")
        if not 0.0 <= self.p_value <= 1.0:
            raise ValueError(f"p-value {self.p_value} outside [0, 1]")
        if self.n < 3:
            raise ValueError("p-value undefined for n < 3")


def average_ranks(values) -> np.ndarray:
    """1-based ranks where tied values share the average of their ranks."""
    arr = np.asarray(values, dtype=np.float64)
    n = arr.shape[0]
    order = np.argsort(arr, kind="stable")
    ranks = np.empty(n, dtype=np.float64)
    sorted_vals = arr[order]
    i = 0
    while i < n:
        j = i
        while j + 1 < n and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def _pearson(x: np.ndarray, y: np.ndarray) -> float:
    xc = x - x.mean()
    yc = y - y.mean()
    vx = float(xc @ xc)
    vy = float(yc @ yc)
    if vx == 0.0 or vy == 0.0:
        raise UndefinedCorrelation("correlation undefined for constant input")
    rho = float(xc @ yc) / math.sqrt(vx * vy)
    return min(1.0, max(-1.0, rho))


def _betacf(a: float, b: float, x: float) -> float:
    # continued fraction for the incomplete beta (Lentz's method)
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, 300):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 3e-16:
            break
    return h


def betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta function I_x(a, b)."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def student_t_sf(t: float, df: float) -> float:
    """P(T > t) for Student's t with df degrees of freedom."""
    if df <= 0:
        raise ValueError("degrees of freedom must be positive")
    x = df / (df + t * t)
    tail = 0.5 * betainc(df / 2.0, 0.5, x)
    return tail if t >= 0 else 1.0 - tail


def _p_value_t(rho: float, n: int) -> float:
    if abs(rho) >= 1.0 - 1e-15:
        return 0.0
    t = abs(rho) * math.sqrt((n - 2) / (1.0 - rho * rho))
    return min(1.0, 2.0 * student_t_sf(t, n - 2))


def _p_value_exact(rx: np.ndarray, ry: np.ndarray, rho: float) -> float:
    n = len(rx)
    if n > 10:
        raise ValueError("exact permutation p-value limited to n <= 10")
    # rho is monotone in sum(rx * perm(ry)) at fixed marginals, but ties make
    # direct recomputation the safer route
    xc = rx - rx.mean()
    denom = math.sqrt(float(xc @ xc))
    hits = 0
    total = 0
    target = abs(rho) - 1e-12
    for perm in itertools.permutations(ry):
        py = np.array(perm) - ry.mean()
        vy = math.sqrt(float(py @ py))
        r = float(xc @ py) / (denom * vy)
        if abs(r) >= target:
            hits += 1
        total += 1
    return hits / total


def spearman(x, y, method: str = "t") -> CorrelationResult:
    """Rank correlation with a two-sided p-value.

    ``method="t"`` uses the t-distribution approximation on n-2 degrees of
    freedom; ``method="exact"`` enumerates rank permutations (n <= 10 only).
    Raises UndefinedCorrelation when either input is constant.
    """
    if len(x) != len(y):
        raise ValueError(f"length mismatch: {len(x)} vs {len(y)}")
    n = len(x)
    if n < 3:
        raise ValueError("need at least 3 paired samples")
    rx = average_ranks(x)
    ry = average_ranks(y)
    rho = _pearson(rx, ry)
    if method == "t":
        p = _p_value_t(rho, n)
    elif method == "exact":
        p = _p_value_exact(rx, ry, rho)
    else:
        raise ValueError(f"unknown method {method!r}")
    return CorrelationResult(coefficient=rho, p_value=p, n=n)


def descriptive(values, bucket_width: float = 50.0) -> dict:
    """Mean, median, and a fixed-width histogram of a sample."""
    seq = list(values)
    if not seq:
        raise ValueError("descriptive statistics need a non-empty sample")
    if bucket_width <= 0:
        raise ValueError("bucket width must be positive")
    lo_edge = math.floor(min(seq) / bucket_width) * bucket_width
    counts: dict[int, int] = {}
    for v in seq:
        idx = int((v - lo_edge) // bucket_width)
        counts[idx] = counts.get(idx, 0) + 1
    histogram = [
        {
            "lo": lo_edge + k * bucket_width,
            "hi": lo_edge + (k + 1) * bucket_width,
            "count": counts[k],
        }
        for k in sorted(counts)
    ]
    return {
        "mean": statistics.fmean(seq),
        "median": statistics.median(seq),
        "histogram": histogram,
    }
