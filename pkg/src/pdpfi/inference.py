"""Student-t quantiles and corrected mean/variance confidence intervals."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from functools import lru_cache

import numpy as np

from .errors import InvalidProbability, TooFewSamples, ValidationError

_EPS = 1e-16
_TINY = 1e-300


def _betacf(a, b, x):
    """Continued fraction for the incomplete beta function (modified Lentz)."""
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = _TINY if abs(d) < _TINY else d
    d = 1.0 / d
    h = d
    for m in range(1, 100000):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = _TINY if abs(d) < _TINY else d
        c = 1.0 + aa / c
        c = _TINY if abs(c) < _TINY else c
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = _TINY if abs(d) < _TINY else d
        c = 1.0 + aa / c
        c = _TINY if abs(c) < _TINY else c
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise ArithmeticError("incomplete beta continued fraction did not converge")


def betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta function ``I_x(a, b)``."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    lbt = math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b) + a * math.log(x) + b * math.log1p(-x)
    if x < (a + 1.0) / (a + b + 2.0):
        return math.exp(lbt) * _betacf(a, b, x) / a
    return 1.0 - math.exp(lbt) * _betacf(b, a, 1.0 - x) / b


def t_cdf(t: float, df: float) -> float:
    """CDF of Student's t distribution."""
    t2 = t * t
    if t2 < df:
        # central region: P(|T| < |t|) = I_{t^2/(df+t^2)}(1/2, df/2) keeps precision near 0
        half = 0.5 * betainc(0.5, 0.5 * df, t2 / (df + t2))
        return 0.5 + half if t > 0 else 0.5 - half
    tail = 0.5 * betainc(0.5 * df, 0.5, df / (df + t2))
    return 1.0 - tail if t > 0 else tail


def t_pdf(t: float, df: float) -> float:
    lc = math.lgamma(0.5 * (df + 1)) - math.lgamma(0.5 * df) - 0.5 * math.log(df * math.pi)
    return math.exp(lc - 0.5 * (df + 1) * math.log1p(t * t / df))


@lru_cache(maxsize=1024)
def t_quantile(p: float, df: int) -> float:
    """Quantile of Student's t with ``df`` degrees of freedom.

    Inverts :func:`t_cdf` by Newton steps safeguarded with bisection on a
    doubling bracket.
    """
    p = float(p)
    if not 0.0 < p < 1.0 or math.isnan(p):
        raise InvalidProbability(f"p must lie in (0, 1), got {p}")
    if int(df) != df or df < 1:
        raise ValidationError(f"df must be a positive integer, got {df}")
    df = int(df)
    if p == 0.5:
        return 0.0
    if p < 0.5:
        return -t_quantile(1.0 - p, df)
    lo, hi = 0.0, 1.0
    while t_cdf(hi, df) < p:
        lo, hi = hi, 2.0 * hi
    t = 0.5 * (lo + hi)
    for _ in range(400):
        f = t_cdf(t, df) - p
        if f > 0:
            hi = t
        else:
            lo = t
        dens = t_pdf(t, df)
        step = f / dens if dens > 0 else math.inf
        t_new = t - step
        if not lo < t_new < hi:
            t_new = 0.5 * (lo + hi)
        if abs(t_new - t) <= 1e-14 * max(1.0, abs(t)) or hi - lo <= 1e-14 * max(1.0, hi):
            return t_new
        t = t_new
    return t


@dataclass(frozen=True)
class IntervalEstimate:
    """Mean with (correction-scaled) variance and symmetric t interval."""

    mean: float
    variance: float
    df: int
    lower: float
    upper: float
    alpha: float

    @property
    def half_width(self):
        return self.upper - self.mean

    @property
    def width(self):
        return self.upper - self.lower

    def contains(self, value) -> bool:
        return self.lower <= value <= self.upper

    def to_dict(self):
        return asdict(self)


def _check_alpha(alpha):
    if not 0.0 < alpha < 1.0:
        raise InvalidProbability(f"alpha must lie in (0, 1), got {alpha}")


def interval(mean: float, variance: float, df: int, alpha: float) -> IntervalEstimate:
    """Symmetric t interval ``mean +- t_{1-alpha/2, df} * sqrt(variance)``."""
    _check_alpha(alpha)
    half = t_quantile(1.0 - alpha / 2.0, df) * math.sqrt(variance)
    return IntervalEstimate(float(mean), float(variance), int(df), float(mean - half), float(mean + half), float(alpha))


def mean_interval_arrays(values, c: float, alpha: float):
    """Vectorised corrected intervals over axis 0 of ``values`` (shape ``(m, ...)``).

    Returns ``(mean, variance, half_width)`` arrays with variance
    ``(1/m + c) * s**2`` using the unbiased sample variance ``s**2``.
    """
    values = np.asarray(values, dtype=np.float64)
    m = values.shape[0]
    if m < 2:
        raise TooFewSamples(f"need at least 2 samples, got {m}")
    if c < 0:
        raise ValidationError(f"correction constant must be >= 0, got {c}")
    _check_alpha(alpha)
    mean = values.mean(axis=0)
    s2 = np.sum((values - mean) ** 2, axis=0) / (m - 1)
    # identical samples: exact zero spread, and the mean is the common value
    same = np.all(values == values[0], axis=0)
    s2 = np.where(same, 0.0, s2)
    mean = np.where(same, values[0], mean)
    var = (1.0 / m + c) * s2
    half = t_quantile(1.0 - alpha / 2.0, m - 1) * np.sqrt(var)
    return mean, var, half


def corrected_mean_ci(samples, c: float = 0.0, alpha: float = 0.05) -> IntervalEstimate:
    """Mean of ``samples`` with variance ``(1/m + c) * s**2`` and a t interval (``m-1`` df).

    ``c = 0`` gives the ordinary standard error of the mean; ``c > 0``
    inflates it to account for overlap between resampled training sets.
    """
    x = np.asarray(samples, dtype=np.float64).reshape(-1)
    if x.size < 2:
        raise TooFewSamples(f"need at least 2 samples, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise ValidationError("samples must be finite")
    mean, var, half = mean_interval_arrays(x, c, alpha)
    mean, var, half = float(mean), float(var), float(half)
    return IntervalEstimate(mean, var, x.size - 1, mean - half, mean + half, float(alpha))


def mc_mean_ci(values, alpha: float = 0.05) -> IntervalEstimate:
    """Monte Carlo mean of i.i.d. terms: variance ``s**2 / k``, ``k-1`` df."""
    return corrected_mean_ci(values, 0.0, alpha)
