"""Statistics of the ROI and session comparisons.

Repeated-measures ANOVA has no sphericity correction; t-tests are two-sided.
p-values come from the regularized incomplete beta function.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import special, stats

from thermal.exceptions import (
    ConfigurationError, ConstantSeries, DegenerateVariance, IncompleteTable,
    PairLengthMismatch, ZeroVariance,
)
from thermal.signal_pipeline import resample

logger = logging.getLogger(__name__)

SIGNIFICANT = 0.05
APPROACHING = 0.10


@dataclass(frozen=True)
class AnovaResult:
    F: float
    df_effect: int
    df_error: int
    p: float
    partial_eta_sq: float
    ss_effect: float
    ss_subjects: float
    ss_error: float


@dataclass(frozen=True)
class TTestResult:
    t: float
    df: int
    p: float
    mean_difference: float


@dataclass(frozen=True)
class Summary:
    n: int
    mean: float
    sd: float
    sem: float
    ci_low: float
    ci_high: float


@dataclass(frozen=True)
class Correlation:
    r: float
    p: float


@dataclass(frozen=True)
class RoiAgreement:
    pooled_r: float
    pair_r: tuple
    mean_r: float
    sd_r: float
    pooled_p: float
    pair_p: tuple


def _paired_arrays(x, y, minimum):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise PairLengthMismatch(f'Series lengths differ: {x.shape} vs {y.shape}')
    if x.size < minimum:
        raise PairLengthMismatch(f'Need at least {minimum} pairs, got {x.size}')
    return x, y


def f_sf(F, df_effect, df_error):
    """Upper tail of the F distribution."""
    if F <= 0:
        return 1.0
    return float(special.betainc(df_error / 2, df_effect / 2, df_error / (df_error + df_effect * F)))


def t_two_sided(t, df):
    return float(special.betainc(df / 2, 0.5, df / (df + t * t)))


def correlation(x, y):
    """Pearson r with its two-sided p-value."""
    x, y = _paired_arrays(x, y, 3)
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        raise ConstantSeries('Pearson correlation is undefined for a constant series')
    result = stats.pearsonr(x, y)
    return Correlation(float(np.clip(result.statistic, -1.0, 1.0)), float(result.pvalue))


def pearson(x, y):
    return correlation(x, y).r


def rm_anova(table):
    """One-way repeated-measures ANOVA on a participants x conditions table."""
    data = np.asarray(table, dtype=np.float64)
    if data.ndim != 2:
        raise IncompleteTable(f'Expected a participants x conditions table, got shape {data.shape}')
    n, k = data.shape
    if n < 2 or k < 2:
        raise IncompleteTable(f'Need >= 2 participants and >= 2 conditions, got {n}x{k}')
    if not np.all(np.isfinite(data)):
        raise IncompleteTable('Table has missing or non-finite cells')

    grand = data.mean()
    subject_means = data.mean(axis=1, keepdims=True)
    condition_means = data.mean(axis=0, keepdims=True)
    ss_effect = float(n * np.sum((condition_means - grand) ** 2))
    ss_subjects = float(k * np.sum((subject_means - grand) ** 2))
    ss_error = float(np.sum((data - subject_means - condition_means + grand) ** 2))
    ss_total = float(np.sum((data - grand) ** 2))

    df_effect, df_error = k - 1, (k - 1) * (n - 1)
    if ss_error <= 1e-12 * ss_total or ss_error == 0:
        raise DegenerateVariance(f'Error sum of squares is zero (SS_effect={ss_effect:.6g})')
    F = (ss_effect / df_effect) / (ss_error / df_error)
    return AnovaResult(
        F=F,
        df_effect=df_effect,
        df_error=df_error,
        p=f_sf(F, df_effect, df_error),
        partial_eta_sq=ss_effect / (ss_effect + ss_error),
        ss_effect=ss_effect,
        ss_subjects=ss_subjects,
        ss_error=ss_error,
    )


def paired_t(x, y):
    x, y = _paired_arrays(x, y, 2)
    d = x - y
    if np.ptp(d) == 0:
        raise ZeroVariance('Paired differences have zero variance')
    n = d.size
    mean = float(d.mean())
    t = mean / (float(d.std(ddof=1)) / math.sqrt(n))
    return TTestResult(t=t, df=n - 1, p=t_two_sided(t, n - 1), mean_difference=mean)


def bonferroni(p_values, m=None):
    p_values = [float(p) for p in p_values]
    m = len(p_values) if m is None else m
    if m < len(p_values):
        raise ConfigurationError(f'Comparison count {m} is below the {len(p_values)} p-values given')
    if any(not 0 <= p <= 1 for p in p_values):
        raise ConfigurationError('p-values must lie in [0, 1]')
    return [min(1.0, p * m) for p in p_values]


def describe(values):
    """Mean, SD, SEM and 95% confidence interval of the mean."""
    data = np.asarray(values, dtype=np.float64)
    if data.size < 2:
        raise IncompleteTable(f'Need at least 2 values to describe, got {data.size}')
    mean = float(data.mean())
    sd = float(data.std(ddof=1))
    sem = sd / math.sqrt(data.size)
    half = float(stats.t.ppf(0.975, data.size - 1)) * sem
    return Summary(data.size, mean, sd, sem, mean - half, mean + half)


def significance_marker(p):
    if p is None or not math.isfinite(p):
        return ''
    if p < SIGNIFICANT:
        return '*'
    if p < APPROACHING:
        return '±'
    return ''


def roi_agreement(small, large, target_n=100):
    """Small- vs large-ROI agreement on signals resampled to a common length."""
    small, large = list(small), list(large)
    if len(small) != len(large) or not small:
        raise PairLengthMismatch(f'Need matching signal pairs, got {len(small)} and {len(large)}')
    xs = [resample(s, target_n).samples for s in small]
    ys = [resample(s, target_n).samples for s in large]
    pairs = [correlation(x, y) for x, y in zip(xs, ys)]
    pair_r = tuple(c.r for c in pairs)
    pooled = correlation(np.concatenate(xs), np.concatenate(ys))
    sd = float(np.std(pair_r, ddof=1)) if len(pair_r) > 1 else 0.0
    logger.info(f'ROI agreement over {len(pair_r)} pairs: pooled r={pooled.r:.4f}, p={pooled.p:.3g}')
    return RoiAgreement(
        pooled_r=pooled.r,
        pair_r=pair_r,
        mean_r=float(np.mean(pair_r)),
        sd_r=sd,
        pooled_p=pooled.p,
        pair_p=tuple(c.p for c in pairs),
    )
