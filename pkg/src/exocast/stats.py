"""Deterministic descriptive statistics and significance machinery.

Implements the moment estimators used for feature engineering (mean,
adjusted Fisher-Pearson skewness G1, bias-corrected excess kurtosis G2),
Pearson product-moment correlation, and two-sided p-values through
Student's t via the regularized incomplete beta function.

All functions are strict: degenerate inputs raise. Callers that want a
tolerant policy (e.g. feature engineering zeroing degenerate windows)
implement it on top.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    DomainError,
    EmptySample,
    InsufficientSamples,
    InvalidR,
    LengthMismatch,
    NonFiniteInput,
    ZeroVariance,
)


@dataclass(frozen=True)
class SampleStats:
    n: int
    mean: float
    skewness: float
    excess_kurtosis: float


def _as_array(xs: Sequence[float]) -> np.ndarray:
    a = np.asarray(xs, dtype=float)
    if a.size == 0:
        raise EmptySample("empty sample")
    if not np.all(np.isfinite(a)):
        raise NonFiniteInput("sample contains NaN or infinity")
    return a


def mean(xs: Sequence[float]) -> float:
    return float(np.mean(_as_array(xs)))


def sample_skewness(xs: Sequence[float]) -> float:
    """Adjusted Fisher-Pearson G1 = n^2/((n-1)(n-2)) * m3 / s^3."""
    a = _as_array(xs)
    n = a.size
    if n < 3:
        raise InsufficientSamples(f"skewness needs n >= 3, got {n}")
    d = a - a.mean()
    s2 = float(np.sum(d * d)) / (n - 1)
    if s2 <= 0.0:
        raise ZeroVariance("skewness undefined for zero-variance sample")
    m3 = float(np.sum(d**3)) / n
    return (n * n / ((n - 1) * (n - 2))) * m3 / s2**1.5


def excess_kurtosis(xs: Sequence[float]) -> float:
    """Bias-corrected G2 = n(n+1)/((n-1)(n-2)(n-3)) * sum(d^4)/s^4 - 3(n-1)^2/((n-2)(n-3))."""
    a = _as_array(xs)
    n = a.size
    if n < 4:
        raise InsufficientSamples(f"excess kurtosis needs n >= 4, got {n}")
    d = a - a.mean()
    s2 = float(np.sum(d * d)) / (n - 1)
    if s2 <= 0.0:
        raise ZeroVariance("kurtosis undefined for zero-variance sample")
    term = (n * (n + 1) / ((n - 1) * (n - 2) * (n - 3))) * float(np.sum(d**4)) / (s2 * s2)
    return term - 3.0 * (n - 1) ** 2 / ((n - 2) * (n - 3))


def sample_stats(xs: Sequence[float]) -> SampleStats:
    a = _as_array(xs)
    return SampleStats(
        n=int(a.size),
        mean=mean(a),
        skewness=sample_skewness(a),
        excess_kurtosis=excess_kurtosis(a),
    )


def pearson_r(xs: Sequence[float], ys: Sequence[float]) -> float:
    a = _as_array(xs)
    b = _as_array(ys)
    if a.size != b.size:
        raise LengthMismatch(f"lengths differ: {a.size} vs {b.size}")
    n = a.size
    if n < 2:
        raise InsufficientSamples("pearson_r needs n >= 2")
    da = a - a.mean()
    db = b - b.mean()
    va = float(np.sum(da * da))
    vb = float(np.sum(db * db))
    if va <= 0.0 or vb <= 0.0:
        raise ZeroVariance("pearson_r undefined when either variance is zero")
    r = float(np.sum(da * db)) / math.sqrt(va * vb)
    # Floating-point roundoff can push |r| marginally past 1.
    return max(-1.0, min(1.0, r))


def pearson_p_two_sided(r: float, n: int) -> float:
    """Two-sided p-value for a Pearson correlation under H0: rho = 0.

    t = r * sqrt((n-2)/(1-r^2)) ~ Student-t with df = n-2, and
    p = I_{df/(df+t^2)}(df/2, 1/2).
    """
    if n < 3:
        raise InsufficientSamples("p-value needs n >= 3")
    if abs(r) > 1.0:
        raise InvalidR(f"|r| > 1: {r}")
    if abs(r) == 1.0:
        return 0.0
    df = n - 2
    t2 = r * r * df / (1.0 - r * r)
    p = reg_incomplete_beta(df / 2.0, 0.5, df / (df + t2))
    return max(0.0, min(1.0, p))


_MAX_CF_ITER = 300
_CF_EPS = 1e-16
_CF_TINY = 1e-300


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta function (modified Lentz)."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _CF_TINY:
        d = _CF_TINY
    d = 1.0 / d
    h = d
    for m in range(1, _MAX_CF_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_TINY:
            d = _CF_TINY
        c = 1.0 + aa / c
        if abs(c) < _CF_TINY:
            c = _CF_TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_TINY:
            d = _CF_TINY
        c = 1.0 + aa / c
        if abs(c) < _CF_TINY:
            c = _CF_TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_EPS:
            return h
    raise DomainError(f"incomplete beta continued fraction failed to converge (a={a}, b={b}, x={x})")


def reg_incomplete_beta(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b) via Lentz continued fraction.

    Uses the symmetry I_x(a,b) = 1 - I_{1-x}(b,a) when x is past the
    convergence switch point (a+1)/(a+b+2).
    """
    if a <= 0.0 or b <= 0.0:
        raise DomainError(f"parameters must be positive: a={a}, b={b}")
    if x < 0.0 or x > 1.0:
        raise DomainError(f"x must lie in [0, 1]: {x}")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b
