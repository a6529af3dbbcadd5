"""Thermal variability metrics, the 16-cell metric grid and the respiratory pSQI."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import signal as sp_signal

from .exceptions import ConfigurationError, RateTooLow, SignalError, TooShort
from .signal_pipeline import DEFAULT_CUTOFF_HZ, lowpass, normalize

logger = logging.getLogger(__name__)

BASE_METRICS = ('TD', 'STV', 'SDSTV', 'SDTV')
# Source suffix -> (low-pass filtered, normalized)
SOURCES = {
    '': (False, False),
    '_n': (False, True),
    '_L': (True, False),
    '_Ln': (True, True),
}
METRIC_NAMES = tuple(f'{m}{s}' for s in SOURCES for m in BASE_METRICS)
EXISTING_METRICS = ('TD', 'STV')

MIN_PSD_SAMPLES = 16


def metric_units():
    """Unit of every MetricSet cell; normalized sources are dimensionless."""
    base = {'TD': 'degC', 'STV': 'degC/s', 'SDSTV': 'degC', 'SDTV': 'degC'}
    units = {}
    for suffix, (_, normalized) in SOURCES.items():
        for name, unit in base.items():
            if normalized:
                unit = '1/s' if name == 'STV' else '1'
            units[f'{name}{suffix}'] = unit
    return units


@dataclass(frozen=True)
class LinearFit:
    slope: float
    intercept: float
    residual_rms: float


@dataclass(frozen=True)
class MetricSet:
    """The sixteen metric values of one recording, keyed by their exact names."""

    values: dict

    def __post_init__(self):
        values = {name: float(self.values[name]) for name in METRIC_NAMES if name in self.values}
        missing = set(METRIC_NAMES) - set(values)
        if missing:
            raise ConfigurationError(f'MetricSet is missing {sorted(missing)}')
        for name, value in values.items():
            if not math.isfinite(value):
                raise SignalError(f'{name} is not finite')
            if name.startswith(('SDSTV', 'SDTV')) and value < 0:
                raise SignalError(f'{name} must be non-negative, got {value}')
        object.__setattr__(self, 'values', values)

    def __getitem__(self, name):
        return self.values[name]

    def as_dict(self):
        return dict(self.values)

    @property
    def units(self):
        return metric_units()


@dataclass(frozen=True, eq=False)
class PowerSpectrum:
    frequencies: np.ndarray
    power: np.ndarray

    @property
    def bin_width(self):
        return float(self.frequencies[1] - self.frequencies[0])


@dataclass(frozen=True)
class SqiBand:
    f_min: float = 0.1
    f_max: float = 0.85

    def __post_init__(self):
        if not 0 < self.f_min < self.f_max:
            raise ConfigurationError(f'SQI band needs 0 < f_min < f_max, got [{self.f_min}, {self.f_max}]')


def _require(sig, n, name):
    if sig.n < n:
        raise TooShort(f'{name} needs at least {n} samples, got {sig.n}')


def td(sig):
    _require(sig, 2, 'TD')
    return float(sig.samples[-1] - sig.samples[0])


def stv(sig):
    """Least-squares line of the samples against time in seconds."""
    _require(sig, 2, 'STV')
    t = sig.times
    # Centering on the first sample keeps a constant signal at exactly zero slope.
    d = sig.samples - sig.samples[0]
    tc = t - t.mean()
    slope = float(np.dot(tc, d) / np.dot(tc, tc))
    intercept = float(sig.samples[0] + d.mean() - slope * t.mean())
    residuals = sig.samples - (intercept + slope * t)
    return LinearFit(slope, intercept, float(np.sqrt(np.mean(residuals ** 2))))


def sdstv(sig):
    _require(sig, 3, 'SDSTV')
    return float(np.std(np.diff(sig.samples), ddof=1))


def sdtv(sig):
    _require(sig, 2, 'SDTV')
    return float(np.std(sig.samples - sig.samples[0], ddof=1))


def base_metrics(sig):
    return {
        'TD': td(sig),
        'STV': stv(sig).slope,
        'SDSTV': sdstv(sig),
        'SDTV': sdtv(sig),
    }


def derived_sources(nonfiltered, context=None, cutoff=DEFAULT_CUTOFF_HZ):
    """The four metric sources; the low-pass filter runs before normalisation."""
    if nonfiltered.filtered or nonfiltered.normalized:
        raise SignalError('metric_set expects a nonfiltered, unnormalized signal')
    filtered = lowpass(nonfiltered, cutoff)
    raw_range = context.raw if context else None
    lowpass_range = context.lowpass if context else None
    return {
        '': nonfiltered,
        '_n': normalize([nonfiltered], raw_range)[0],
        '_L': filtered,
        '_Ln': normalize([filtered], lowpass_range)[0],
    }


def metric_set(nonfiltered, context=None, cutoff=DEFAULT_CUTOFF_HZ):
    """All sixteen metrics of an outlier-rejected recording.

    `context` carries the person's pooled normalisation ranges; without it
    each recording is scaled by its own min and max.
    """
    if context is not None:
        cutoff = context.cutoff
    values = {}
    for suffix, source in derived_sources(nonfiltered, context, cutoff).items():
        for name, value in base_metrics(source).items():
            values[f'{name}{suffix}'] = value
    return MetricSet(values)


def psd(sig):
    """One-sided Hann periodogram of the mean-removed signal."""
    _require(sig, MIN_PSD_SAMPLES, 'PSD')
    freqs, power = sp_signal.periodogram(
        sig.samples, fs=sig.sample_rate, window='hann',
        detrend='constant', scaling='density', return_onesided=True,
    )
    return PowerSpectrum(freqs, np.maximum(power, 0.0))


def psqi(sig, band=None):
    """Fraction of non-DC spectral power inside the respiratory band."""
    band = band or SqiBand()
    nyquist = sig.sample_rate / 2
    if band.f_max > nyquist:
        raise RateTooLow(f'Nyquist {nyquist} Hz is below the band edge {band.f_max} Hz')
    spectrum = psd(sig)
    freqs, power = spectrum.frequencies[1:], spectrum.power[1:]
    total = float(power.sum())
    if total <= 0:
        logger.warning('Signal has no non-DC power; pSQI reported as 0')
        return 0.0
    in_band = (freqs >= band.f_min) & (freqs <= band.f_max)
    return float(np.clip(power[in_band].sum() / total, 0.0, 1.0))
