"""Ground-truth generators for signals, frame sequences and study cohorts.

Nothing here calls into the pipeline: every truth value is computed from
the generating parameters directly.
"""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from .exceptions import InvalidSpec
from .frame_io import MAX_TEMP_C, MIN_TEMP_C, FrameSequence, ThermalFrame
from .signal_pipeline import ThermalSignal

logger = logging.getLogger(__name__)


def _from_mapping(cls, mapping):
    names = {f.name for f in fields(cls)}
    unknown = set(mapping) - names
    if unknown:
        raise InvalidSpec(f'Unknown {cls.__name__} fields: {sorted(unknown)}')
    try:
        return cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in mapping.items()})
    except TypeError as e:
        raise InvalidSpec(f'Bad {cls.__name__}: {e}') from e


@dataclass(frozen=True)
class SignalSpec:
    duration: float = 300.0
    rate: float = 4.0
    baseline: float = 34.0
    drift_slope: float = 0.0
    breathing_amp: float = 0.0
    breathing_freq: float = 0.25
    noise_sd: float = 0.0
    spike_fraction: float = 0.0
    spike_amp: float = 5.0
    seed: int = 0

    def __post_init__(self):
        if not (self.duration > 0 and self.rate > 0):
            raise InvalidSpec(f'duration and rate must be > 0, got {self.duration} s @ {self.rate} Hz')
        if self.n_samples < 2:
            raise InvalidSpec(f'{self.duration} s @ {self.rate} Hz yields fewer than 2 samples')
        if not 0 <= self.breathing_freq < self.rate / 2:
            raise InvalidSpec(f'breathing_freq {self.breathing_freq} Hz must lie below Nyquist ({self.rate / 2} Hz)')
        if not 0 <= self.spike_fraction <= 0.2:
            raise InvalidSpec(f'spike_fraction must be in [0, 0.2], got {self.spike_fraction}')
        if self.noise_sd < 0 or self.breathing_amp < 0:
            raise InvalidSpec('noise_sd and breathing_amp must be non-negative')

    @property
    def n_samples(self):
        return int(round(self.duration * self.rate))

    @classmethod
    def from_dict(cls, mapping):
        return _from_mapping(cls, mapping)


@dataclass(frozen=True, eq=False)
class SyntheticSignal:
    signal: ThermalSignal
    spec: SignalSpec
    clean: np.ndarray
    spike_indices: np.ndarray

    def truth(self):
        return {
            'kind': 'signal',
            'spec': asdict(self.spec),
            'drift_slope': self.spec.drift_slope,
            'spike_indices': self.spike_indices.tolist(),
        }


def gen_signal(spec):
    """Drift + sinusoidal breathing + white noise + spikes at distinct random indices."""
    rng = np.random.default_rng(spec.seed)
    n = spec.n_samples
    t = np.arange(n) / spec.rate
    clean = spec.baseline + spec.drift_slope * t
    if spec.breathing_amp:
        clean = clean + spec.breathing_amp * np.sin(2 * np.pi * spec.breathing_freq * t)
    if spec.noise_sd:
        clean = clean + rng.normal(0.0, spec.noise_sd, n)
    samples = clean.copy()
    count = int(round(spec.spike_fraction * n))
    spikes = np.sort(rng.choice(n, size=count, replace=False)) if count else np.array([], dtype=int)
    samples[spikes] += spec.spike_amp
    return SyntheticSignal(ThermalSignal(samples, spec.rate), spec, clean, spikes)


# Session presets: direction of effect only, magnitudes are generator choices.
PRESETS = {
    'rest': dict(drift_slope=0.001, breathing_amp=0.1, breathing_freq=0.25, noise_sd=0.02),
    'math_easy': dict(drift_slope=-0.002, breathing_amp=0.1, breathing_freq=0.27, noise_sd=0.025),
    'math_hard': dict(drift_slope=-0.003, breathing_amp=0.15, breathing_freq=0.3, noise_sd=0.05),
    'assembly': dict(drift_slope=-0.0003, breathing_amp=0.12, breathing_freq=0.25, noise_sd=0.02),
    'assembly_stressors': dict(drift_slope=-0.0003, breathing_amp=0.12, breathing_freq=0.25, noise_sd=0.04),
    'respiratory': dict(duration=100.0, rate=4.0, drift_slope=0.05, breathing_freq=0.25, noise_sd=0.1),
}
SESSION_LABELS = {'rest': 'Rest', 'math_easy': 'MathEasy', 'math_hard': 'MathHard'}

RESPIRATORY_PSQI_TARGET = 0.68


def _hann_ramp_power():
    """Windowed power of a unit-rise centred ramp relative to rise**2 (continuous limit)."""
    return (1 / 32 - 1 / (4 * math.pi ** 2) + 1 / (64 * math.pi ** 2)) / (3 / 8)


def respiratory_amplitude(target, duration, rate, drift_slope, noise_sd, band=(0.1, 0.85)):
    """Breathing amplitude giving `target` pSQI for a drift + sinusoid + noise signal.

    Drift power falls below the band, the in-band sinusoid counts fully and
    white noise contributes in proportion to the band width.
    """
    nyquist = rate / 2
    drift_power = (drift_slope * duration) ** 2 * _hann_ramp_power()
    noise_power = noise_sd ** 2
    noise_in_band = noise_power * (band[1] - band[0]) / nyquist
    half_sq = (target * (drift_power + noise_power) - noise_in_band) / (1 - target)
    if half_sq <= 0:
        raise InvalidSpec(f'pSQI {target} is unreachable for this drift and noise')
    return math.sqrt(2 * half_sq)


def preset_spec(name, seed=0, **overrides):
    try:
        params = dict(PRESETS[name])
    except KeyError:
        raise InvalidSpec(f'Unknown preset {name!r}; choose from {sorted(PRESETS)}') from None
    params.update(overrides)
    if name == 'respiratory' and 'breathing_amp' not in params:
        defaults = SignalSpec()
        params['breathing_amp'] = respiratory_amplitude(
            RESPIRATORY_PSQI_TARGET,
            params.get('duration', defaults.duration), params.get('rate', defaults.rate),
            params['drift_slope'], params['noise_sd'],
        )
    return SignalSpec(seed=seed, **params)


# Cohorts

@dataclass(frozen=True, eq=False)
class CohortSession:
    participant_id: str
    session_label: str
    spec: SignalSpec
    signal: ThermalSignal


def gen_cohort(n_participants=12, seed=0, presets=('rest', 'math_easy', 'math_hard'),
               duration=300.0, rate=4.0):
    """Every participant runs every preset session.

    People differ in baseline, noise level and breathing depth; each session
    gets its own drift jitter so the directional metrics vary between people.
    """
    if n_participants < 1:
        raise InvalidSpec(f'n_participants must be >= 1, got {n_participants}')
    rng = np.random.default_rng(seed)
    sessions = []
    for p in range(n_participants):
        participant = f'P{p + 1:02d}'
        baseline = rng.normal(34.0, 0.8)
        noise_scale = rng.lognormal(0.0, 0.2)
        breath_scale = rng.uniform(0.85, 1.15)
        for name in presets:
            base = preset_spec(name)
            spec = preset_spec(
                name,
                seed=int(rng.integers(2 ** 31)),
                duration=duration, rate=rate, baseline=baseline,
                drift_slope=base.drift_slope + rng.normal(0.0, 0.004),
                noise_sd=base.noise_sd * noise_scale,
                breathing_amp=base.breathing_amp * breath_scale,
            )
            sessions.append(CohortSession(
                participant, SESSION_LABELS.get(name, name), spec, gen_signal(spec).signal,
            ))
    logger.debug(f'Generated cohort of {n_participants} participants x {len(presets)} sessions (seed {seed})')
    return sessions


# Scenes

@dataclass(frozen=True)
class SceneSpec:
    width: int = 160
    height: int = 120
    duration: float = 10.0
    rate: float = 8.7
    background: float = 30.0
    blob_peak: float = 35.0
    blob_sigma: float = 8.0
    start: tuple = (80.0, 60.0)
    velocity: tuple = (0.0, 0.0)  # px/s
    sway_amp: float = 0.0  # px along x
    sway_freq: float = 0.0
    temp_slope: float = 0.0  # whole-field drift, C/s
    breathing_amp: float = 0.0  # C on the blob peak
    breathing_freq: float = 0.25
    pixel_noise_sd: float = 0.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, 'start', tuple(float(v) for v in self.start))
        object.__setattr__(self, 'velocity', tuple(float(v) for v in self.velocity))
        if self.width < 1 or self.height < 1:
            raise InvalidSpec(f'Frame size must be positive, got {self.width}x{self.height}')
        if not (self.duration > 0 and self.rate > 0):
            raise InvalidSpec('duration and rate must be > 0')
        if self.n_frames < 1:
            raise InvalidSpec(f'{self.duration} s @ {self.rate} fps yields no frames')
        if not self.blob_sigma > 0 or self.pixel_noise_sd < 0:
            raise InvalidSpec('blob_sigma must be > 0 and pixel_noise_sd >= 0')
        margin = 2 * self.blob_sigma
        centers = self.centers()
        if (centers[:, 0].min() - margin < -0.5 or centers[:, 0].max() + margin > self.width - 0.5
                or centers[:, 1].min() - margin < -0.5 or centers[:, 1].max() + margin > self.height - 0.5):
            raise InvalidSpec(f'Blob path leaves the 2-sigma margin of the {self.width}x{self.height} frame')

    @property
    def frame_rate(self):
        """Rate as stored in NHTF (f32)."""
        return float(np.float32(self.rate))

    @property
    def n_frames(self):
        return int(round(self.duration * self.rate))

    def times(self):
        return np.arange(self.n_frames) / self.frame_rate

    def centers(self):
        t = self.times()
        x = self.start[0] + self.velocity[0] * t
        if self.sway_amp:
            x = x + self.sway_amp * np.sin(2 * np.pi * self.sway_freq * t)
        y = self.start[1] + self.velocity[1] * t
        return np.column_stack([x, y])

    @classmethod
    def from_dict(cls, mapping):
        return _from_mapping(cls, mapping)


@dataclass(frozen=True, eq=False)
class SceneTruth:
    spec: SceneSpec
    times: np.ndarray
    centers: np.ndarray
    offsets: np.ndarray  # background + whole-field drift
    amplitudes: np.ndarray  # blob height above the offset

    def _profile(self, coords, center):
        return np.exp(-((coords - center) ** 2) / (2 * self.spec.blob_sigma ** 2))

    def roi_mean(self, frame_index, roi):
        """Noise-free mean temperature of the pixels `roi` owns in one frame."""
        x0 = max(math.ceil(roi.center_x - roi.width / 2), 0)
        y0 = max(math.ceil(roi.center_y - roi.height / 2), 0)
        x1 = min(math.ceil(roi.center_x - roi.width / 2) + roi.width, self.spec.width)
        y1 = min(math.ceil(roi.center_y - roi.height / 2) + roi.height, self.spec.height)
        cx, cy = self.centers[frame_index]
        gx = self._profile(np.arange(x0, x1, dtype=np.float64), cx).sum()
        gy = self._profile(np.arange(y0, y1, dtype=np.float64), cy).sum()
        area = (x1 - x0) * (y1 - y0)
        return float(self.offsets[frame_index] + self.amplitudes[frame_index] * gx * gy / area)

    def to_dict(self):
        return {
            'kind': 'scene',
            'spec': asdict(self.spec),
            'times': self.times.tolist(),
            'centers': self.centers.tolist(),
            'offsets': self.offsets.tolist(),
            'amplitudes': self.amplitudes.tolist(),
        }


@dataclass(frozen=True, eq=False)
class SyntheticScene:
    sequence: FrameSequence
    truth: SceneTruth


def gen_sequence(spec):
    """Background + Gaussian blob on its path + pixel noise, one frame per time step."""
    rng = np.random.default_rng(spec.seed)
    times = spec.times()
    centers = spec.centers()
    offsets = spec.background + spec.temp_slope * times
    amplitudes = np.full(times.size, spec.blob_peak - spec.background)
    if spec.breathing_amp:
        amplitudes = amplitudes + spec.breathing_amp * np.sin(2 * np.pi * spec.breathing_freq * times)
    truth = SceneTruth(spec, times, centers, offsets, amplitudes)

    xs = np.arange(spec.width, dtype=np.float64)
    ys = np.arange(spec.height, dtype=np.float64)
    frames = []
    for k, t in enumerate(times):
        blob = np.outer(truth._profile(ys, centers[k, 1]), truth._profile(xs, centers[k, 0]))
        field = offsets[k] + amplitudes[k] * blob
        if spec.pixel_noise_sd:
            field = field + rng.normal(0.0, spec.pixel_noise_sd, field.shape)
        if field.min() < MIN_TEMP_C or field.max() > MAX_TEMP_C:
            raise InvalidSpec(f'Frame {k} leaves the radiometric range [{MIN_TEMP_C}, {MAX_TEMP_C}] C')
        frames.append(ThermalFrame(float(t), field))
    logger.debug(f'Generated {len(frames)} frames of {spec.width}x{spec.height} (seed {spec.seed})')
    return SyntheticScene(FrameSequence(frames, spec.frame_rate), truth)
