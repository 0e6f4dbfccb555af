"""Small-sample statistics for campaign comparison.

Welch's unequal-variance two-sample t-test with the Welch-Satterthwaite
degrees of freedom, and mean +/- 95% confidence intervals. The t
distribution's CDF is evaluated by adaptive quadrature of the density
written out from its closed form, and quantiles by root finding on that
CDF, so results carry no table lookups; accuracy is well inside 1e-6,
enough for alpha = 0.05 decisions.
"""

from __future__ import annotations

import math
from typing import NamedTuple, Sequence

from scipy.integrate import quad
from scipy.optimize import brentq

ALTERNATIVES = ("two-sided", "greater", "less")


def t_density(x: float, df: float) -> float:
    if df <= 0:
        raise ValueError("degrees of freedom must be positive")
    log_norm = math.lgamma((df + 1.0) / 2.0) - math.lgamma(df / 2.0)
    log_norm -= 0.5 * math.log(df * math.pi)
    return math.exp(log_norm - ((df + 1.0) / 2.0) * math.log1p(x * x / df))


def t_sf(t: float, df: float) -> float:
    """P(T > t) for Student's t with df degrees of freedom."""
    if t < 0:
        return 1.0 - t_sf(-t, df)
    tail, _err = quad(t_density, 0.0, t, args=(df,), limit=200)
    return max(0.5 - tail, 0.0)


def t_cdf(t: float, df: float) -> float:
    return 1.0 - t_sf(t, df)


def t_ppf(q: float, df: float) -> float:
    """Quantile of Student's t; q in (0, 1)."""
    if not 0.0 < q < 1.0:
        raise ValueError("quantile level must lie in (0, 1)")
    if q == 0.5:
        return 0.0
    if q < 0.5:
        return -t_ppf(1.0 - q, df)
    hi = 1.0
    while t_cdf(hi, df) < q:
        hi *= 2.0
        if hi > 1e12:
            raise ArithmeticError("quantile bracket expansion failed")
    return brentq(lambda x: t_cdf(x, df) - q, 0.0, hi, xtol=1e-12, rtol=1e-12)


class WelchResult(NamedTuple):
    t: float
    df: float
    p: float
    degenerate: bool


def _mean_var(sample: Sequence[float]) -> tuple[float, float, int]:
    n = len(sample)
    if n < 2:
        raise ValueError("each sample needs at least 2 values")
    mean = math.fsum(sample) / n
    var = math.fsum((x - mean) ** 2 for x in sample) / (n - 1)
    return mean, var, n


def welch_t_test(
    sample_a: Sequence[float],
    sample_b: Sequence[float],
    alternative: str = "two-sided",
) -> WelchResult:
    """Welch's t-test of mean(sample_a) against mean(sample_b).

    alternative "greater" tests mean_a > mean_b. Zero pooled variance is
    degenerate: the statistic is reported as t = 0, p = 1 with the flag set
    rather than dividing by a zero standard error.
    """
    if alternative not in ALTERNATIVES:
        raise ValueError(f"unknown alternative {alternative!r}")
    mean_a, var_a, n_a = _mean_var(sample_a)
    mean_b, var_b, n_b = _mean_var(sample_b)
    qa = var_a / n_a
    qb = var_b / n_b
    se_sq = qa + qb
    if se_sq == 0.0:
        return WelchResult(0.0, 0.0, 1.0, True)
    t = (mean_a - mean_b) / math.sqrt(se_sq)
    df = se_sq * se_sq / (qa * qa / (n_a - 1) + qb * qb / (n_b - 1))
    if alternative == "two-sided":
        p = min(2.0 * t_sf(abs(t), df), 1.0)
    elif alternative == "greater":
        p = t_sf(t, df)
    else:
        p = t_cdf(t, df)
    return WelchResult(t, df, p, False)


class ConfidenceInterval(NamedTuple):
    mean: float
    half_width: float


def confidence_interval_95(sample: Sequence[float]) -> ConfidenceInterval:
    """mean +/- t_{0.975, n-1} * s / sqrt(n)."""
    mean, var, n = _mean_var(sample)
    if var == 0.0:
        return ConfidenceInterval(mean, 0.0)
    half = t_ppf(0.975, n - 1) * math.sqrt(var / n)
    return ConfidenceInterval(mean, half)
