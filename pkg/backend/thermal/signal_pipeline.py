"""From tracked frames to clean 1-D thermal signals.

Order is fixed: spatial average -> outlier rejection -> (low-pass) -> (normalisation).
"""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import signal as sp_signal

from .exceptions import (
    AllOutliers, ConfigurationError, ConstantSignal, EmptyRoi, IoFailure,
    LengthMismatch, RateTooLow, SignalError, TooShort,
)
from .utils import atomic_write

logger = logging.getLogger(__name__)

DEFAULT_CUTOFF_HZ = 0.08
SIGNAL_FIELDS = ['k', 't_seconds', 'value']


def _frozen(values, dtype=np.float64):
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ThermalSignal:
    samples: np.ndarray
    sample_rate: float
    filtered: bool = False
    normalized: bool = False
    # Samples taken from low-confidence tracking frames.
    suspect: np.ndarray | None = None

    def __post_init__(self):
        samples = _frozen(self.samples)
        if samples.ndim != 1:
            raise LengthMismatch(f'Signal must be 1-D, got shape {samples.shape}')
        if not np.all(np.isfinite(samples)):
            raise SignalError('Signal contains non-finite samples')
        if not self.sample_rate > 0:
            raise RateTooLow(f'sample_rate must be > 0, got {self.sample_rate}')
        if self.normalized and samples.size and (samples.min() < 0 or samples.max() > 1):
            raise SignalError('Normalized signal has samples outside [0, 1]')
        object.__setattr__(self, 'samples', samples)
        object.__setattr__(self, 'sample_rate', float(self.sample_rate))
        if self.suspect is not None:
            suspect = _frozen(self.suspect, dtype=bool)
            if suspect.shape != samples.shape:
                raise LengthMismatch('Suspect mask does not match the samples')
            object.__setattr__(self, 'suspect', suspect)

    @property
    def n(self):
        return self.samples.size

    @property
    def times(self):
        return np.arange(self.n) / self.sample_rate

    @property
    def duration(self):
        """Time from the first to the last sample."""
        return (self.n - 1) / self.sample_rate if self.n else 0.0

    def with_samples(self, samples, **flags):
        flags.setdefault('suspect', None)
        return replace(self, samples=samples, **flags)


@dataclass(frozen=True)
class OutlierConfig:
    g: float = 1.5
    window_fraction: float = 1 / 3
    min_window_seconds: float = 30.0

    def __post_init__(self):
        if not self.g > 0:
            raise ConfigurationError(f'Tukey constant g must be > 0, got {self.g}')
        if not 0 < self.window_fraction <= 1:
            raise ConfigurationError(f'window_fraction must be in (0, 1], got {self.window_fraction}')
        if not self.min_window_seconds > 0:
            raise ConfigurationError(f'min_window_seconds must be > 0, got {self.min_window_seconds}')


@dataclass(frozen=True)
class NormalizationRange:
    lo: float
    hi: float


@dataclass(frozen=True)
class PersonContext:
    """Pooled min/max of one person's nonfiltered and low-pass sources."""

    raw: NormalizationRange
    lowpass: NormalizationRange
    cutoff: float = DEFAULT_CUTOFF_HZ


def spatial_average(frame, roi):
    x0, y0, x1, y1 = roi.pixel_bounds()
    x0, y0 = max(x0, 0), max(y0, 0)
    x1, y1 = min(x1, frame.width), min(y1, frame.height)
    if x1 <= x0 or y1 <= y0:
        raise EmptyRoi(f'{roi} covers no pixel of the {frame.width}x{frame.height} frame')
    return float(frame.temps[y0:y1, x0:x1].astype(np.float64).mean())


def extract_signal(seq, traj):
    if len(traj) != len(seq):
        raise LengthMismatch(f'Trajectory has {len(traj)} ROIs for {len(seq)} frames')
    samples = [spatial_average(frame, roi) for frame, roi in zip(seq, traj.rois)]
    suspect = np.asarray(traj.low_confidence, dtype=bool)
    return ThermalSignal(samples, seq.nominal_rate, suspect=suspect if suspect.any() else None)


def window_length(n, sample_rate, cfg):
    """Sliding-window length in samples: max(fraction of n, minimum seconds), capped at n."""
    length = max(cfg.window_fraction * n, cfg.min_window_seconds * sample_rate)
    return int(min(n, max(4, round(length))))


def _window_quartiles(x, length, suspect=None):
    n = x.size
    if suspect is not None and suspect.any() and (~suspect).sum() >= 4:
        values = np.where(suspect, np.nan, x)
        windows = sliding_window_view(values, length)
        q1, q3 = np.nanpercentile(windows, [25, 75], axis=1)
    else:
        windows = sliding_window_view(x, length)
        q1, q3 = np.percentile(windows, [25, 75], axis=1, method='linear')
    # Centered windows, shifted inwards at the edges so each keeps its full length.
    starts = np.clip(np.arange(n) - length // 2, 0, n - length)
    return q1[starts], q3[starts]


def find_outliers(sig, cfg=None):
    """Boolean mask of samples outside the sliding Tukey fences."""
    cfg = cfg or OutlierConfig()
    if sig.n < 4:
        raise TooShort(f'Outlier rejection needs at least 4 samples, got {sig.n}')
    length = window_length(sig.n, sig.sample_rate, cfg)
    logger.debug(f'Outlier window: {length} samples ({length / sig.sample_rate:.1f} s) for n={sig.n}')
    q1, q3 = _window_quartiles(sig.samples, length, sig.suspect)
    iqr = q3 - q1
    x = sig.samples
    return (x < q1 - cfg.g * iqr) | (x > q3 + cfg.g * iqr)


def reject_outliers(sig, cfg=None):
    """Drop samples outside the Tukey fences and re-fill them by linear interpolation."""
    mask = find_outliers(sig, cfg)
    if mask.all():
        raise AllOutliers('Every sample was flagged as an outlier')
    if not mask.any():
        return sig.with_samples(sig.samples.copy())
    index = np.arange(sig.n)
    keep = ~mask
    cleaned = sig.samples.copy()
    # np.interp holds the nearest survivor beyond the first/last kept sample.
    cleaned[mask] = np.interp(index[mask], index[keep], sig.samples[keep])
    logger.info(f'Replaced {int(mask.sum())} outlier samples of {sig.n}')
    return sig.with_samples(cleaned)


def settling_length(sample_rate, cutoff):
    return int(math.ceil(sample_rate / cutoff))


def lowpass(sig, cutoff=DEFAULT_CUTOFF_HZ):
    """Zero-phase low-pass: 2nd-order Butterworth run forward and backward."""
    if not sig.sample_rate > 2 * cutoff:
        raise RateTooLow(f'Sample rate {sig.sample_rate} Hz cannot carry a {cutoff} Hz cutoff')
    if sig.n < 2:
        raise TooShort(f'Filtering needs at least 2 samples, got {sig.n}')
    sos = sp_signal.butter(2, cutoff, btype='low', fs=sig.sample_rate, output='sos')
    padlen = min(settling_length(sig.sample_rate, cutoff), sig.n - 1)
    logger.debug(f'Low-pass {cutoff} Hz at {sig.sample_rate} Hz, odd padding of {padlen} samples')
    filtered = sp_signal.sosfiltfilt(sos, sig.samples, padtype='odd', padlen=padlen)
    return sig.with_samples(filtered, filtered=True)


def normalization_range(sigs):
    sigs = list(sigs)
    if not sigs:
        raise TooShort('Normalisation needs at least one signal')
    combined = np.concatenate([s.samples for s in sigs])
    if combined.size < 2:
        raise TooShort('Normalisation needs at least two samples in total')
    lo, hi = float(combined.min()), float(combined.max())
    if hi == lo:
        raise ConstantSignal(f'All samples equal {lo}; min-max scaling is undefined')
    return NormalizationRange(lo, hi)


def normalize(sigs, value_range=None):
    """Min-max scale a person's signals with one shared range."""
    sigs = list(sigs)
    value_range = value_range or normalization_range(sigs)
    if value_range.hi == value_range.lo:
        raise ConstantSignal('Normalisation range has zero width')
    span = value_range.hi - value_range.lo
    logger.debug(f'Normalising {len(sigs)} signal(s) with range [{value_range.lo}, {value_range.hi}]')
    return [
        s.with_samples(np.clip((s.samples - value_range.lo) / span, 0.0, 1.0), normalized=True)
        for s in sigs
    ]


def person_context(sigs, cutoff=DEFAULT_CUTOFF_HZ):
    """Pooled ranges of a person's outlier-rejected signals and their low-pass versions."""
    sigs = list(sigs)
    return PersonContext(
        raw=normalization_range(sigs),
        lowpass=normalization_range([lowpass(s, cutoff) for s in sigs]),
        cutoff=cutoff,
    )


def resample(sig, target_n):
    """Linear interpolation onto target_n points spanning the same time range."""
    if sig.n < 2 or target_n < 2:
        raise TooShort(f'Resampling needs n >= 2 and target_n >= 2, got {sig.n} -> {target_n}')
    span = sig.duration
    if target_n == sig.n:
        return sig.with_samples(sig.samples.copy())
    times = np.linspace(0.0, span, target_n)
    values = np.interp(times, sig.times, sig.samples)
    return sig.with_samples(values, sample_rate=(target_n - 1) / span)


# Signal files: CSV samples + JSON sidecar with provenance

def sidecar_path(path):
    path = Path(path)
    return path.with_suffix('.json')


def write_signal(sig, path):
    path = Path(path)
    suspect = [] if sig.suspect is None else np.flatnonzero(sig.suspect).tolist()
    try:
        with atomic_write(path, 'w', newline='') as handle:
            writer = csv.writer(handle)
            writer.writerow(SIGNAL_FIELDS)
            for k, (t, value) in enumerate(zip(sig.times, sig.samples)):
                writer.writerow([k, repr(float(t)), repr(float(value))])
        with atomic_write(sidecar_path(path), 'w') as handle:
            json.dump({
                'filtered': sig.filtered,
                'normalized': sig.normalized,
                'sample_rate': sig.sample_rate,
                'low_confidence': suspect,
            }, handle, indent=2)
    except OSError as e:
        raise IoFailure(f'Cannot write signal {path}: {e}') from e


def _suspect_mask(indices, n, path):
    """Mask of the low-confidence sample indices listed in the sidecar."""
    if not indices:
        return None
    try:
        indices = np.asarray(indices, dtype=np.int64)
    except (TypeError, ValueError) as e:
        raise IoFailure(f'{path}: low_confidence must list sample indices ({e})') from e
    if indices.ndim != 1 or indices.min() < 0 or indices.max() >= n:
        raise IoFailure(f'{path}: low_confidence indices fall outside 0..{n - 1}')
    mask = np.zeros(n, dtype=bool)
    mask[indices] = True
    return mask


def read_signal(path, sample_rate=None):
    path = Path(path)
    if not path.exists():
        raise IoFailure(f'Signal file not found: {path}')
    try:
        with open(path, newline='') as handle:
            rows = list(csv.DictReader(handle))
        meta = {}
        if sidecar_path(path).exists():
            meta = json.loads(sidecar_path(path).read_text())
    except (OSError, ValueError) as e:
        raise IoFailure(f'Cannot read signal {path}: {e}') from e
    if not isinstance(meta, dict):
        raise IoFailure(f'{sidecar_path(path)}: expected a JSON object')

    try:
        values = [float(r['value']) for r in rows]
        times = [float(r['t_seconds']) for r in rows]
        rate = meta.get('sample_rate', sample_rate)
        rate = None if rate is None else float(rate)
    except (KeyError, TypeError, ValueError) as e:
        raise IoFailure(f'{path}: malformed signal data ({e})') from e
    if rate is None:
        if len(times) < 2 or times[-1] <= times[0]:
            raise TooShort(f'{path}: cannot infer a sample rate')
        rate = (len(times) - 1) / (times[-1] - times[0])
    return ThermalSignal(
        values, rate,
        filtered=bool(meta.get('filtered', False)),
        normalized=bool(meta.get('normalized', False)),
        suspect=_suspect_mask(meta.get('low_confidence'), len(values), sidecar_path(path)),
    )
