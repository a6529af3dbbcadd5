"""Run configuration: settings defaults <- --config file <- command-line flags."""
from __future__ import annotations

import json
import logging
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import cv2
import django
import numpy as np
import scipy
from django.conf import settings

from . import __version__
from .exceptions import ConfigurationError, IoFailure, NoseHeatError
from .metrics import SqiBand
from .roi_tracker import TrackerConfig
from .signal_pipeline import OutlierConfig
from .utils import atomic_write

logger = logging.getLogger(__name__)

NORMALIZATION_SCOPES = ('pooled', 'per-session')
OUTPUT_FORMATS = ('json', 'csv')
MANIFEST_FILE = 'manifest.json'


def parse_pair(value, cast=float, name='value'):
    """'80,60' -> (80.0, 60.0)."""
    if isinstance(value, (list, tuple)):
        parts = list(value)
    else:
        parts = str(value).split(',')
    if len(parts) != 2:
        raise ConfigurationError(f'{name} must be two comma-separated numbers, got {value!r}')
    try:
        return cast(parts[0]), cast(parts[1])
    except (TypeError, ValueError) as e:
        raise ConfigurationError(f'{name}: {e}') from e


@dataclass(frozen=True)
class RunConfig:
    cutoff_hz: float = 0.08
    sqi_band: tuple = (0.1, 0.85)
    normalization: str = 'pooled'
    outlier_g: float = 1.5
    outlier_window_fraction: float = 1 / 3
    outlier_min_window_seconds: float = 30.0
    max_step: float = 5.0
    min_confidence: float = 0.4
    template_update: str = 'anchor'
    template_alpha: float = 0.05
    roi_scale: tuple = (2.75, 1.9)
    small_roi: tuple = (9, 9)
    output_dir: str = 'output'
    format: str = 'json'
    seed_point: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, 'sqi_band', parse_pair(self.sqi_band, name='band'))
        object.__setattr__(self, 'roi_scale', parse_pair(self.roi_scale, name='roi_scale'))
        object.__setattr__(self, 'small_roi', parse_pair(self.small_roi, int, name='small_roi'))
        if self.seed_point is not None:
            object.__setattr__(self, 'seed_point', parse_pair(self.seed_point, name='seed_point'))
        object.__setattr__(self, 'output_dir', str(self.output_dir))
        self.validate()

    def validate(self):
        if self.normalization not in NORMALIZATION_SCOPES:
            raise ConfigurationError(f'normalization must be one of {NORMALIZATION_SCOPES}, got {self.normalization!r}')
        if self.format not in OUTPUT_FORMATS:
            raise ConfigurationError(f'format must be one of {OUTPUT_FORMATS}, got {self.format!r}')
        if not self.cutoff_hz > 0:
            raise ConfigurationError(f'cutoff must be > 0 Hz, got {self.cutoff_hz}')
        if min(self.roi_scale) < 1 or min(self.small_roi) < 1:
            raise ConfigurationError('roi_scale must be >= 1 and small_roi sides >= 1')
        try:
            _ = (self.outlier, self.tracker, self.band)
        except NoseHeatError as e:
            raise ConfigurationError(str(e)) from e

    @property
    def outlier(self):
        return OutlierConfig(self.outlier_g, self.outlier_window_fraction, self.outlier_min_window_seconds)

    @property
    def tracker(self):
        return TrackerConfig(self.max_step, self.min_confidence, self.template_update, self.template_alpha)

    @property
    def band(self):
        return SqiBand(*self.sqi_band)

    @property
    def pooled(self):
        return self.normalization == 'pooled'

    @classmethod
    def from_settings(cls):
        values = getattr(settings, 'NOSE_HEAT', {})
        names = {f.name for f in fields(cls)}
        kwargs = {}
        for key, value in values.items():
            name = key.lower()
            if name in names:
                kwargs[name] = value
        return cls(**kwargs)

    def updated(self, **overrides):
        """Copy with every non-None override applied."""
        changes = {k: v for k, v in overrides.items() if v is not None}
        unknown = set(changes) - {f.name for f in fields(self)}
        if unknown:
            raise ConfigurationError(f'Unknown configuration keys: {sorted(unknown)}')
        return replace(self, **changes) if changes else self

    @classmethod
    def resolve(cls, config_path=None, **overrides):
        config = cls.from_settings()
        if config_path:
            config = config.updated(**load_config_file(config_path))
        return config.updated(**overrides)

    def as_dict(self):
        data = asdict(self)
        for key, value in data.items():
            if isinstance(value, tuple):
                data[key] = list(value)
        return data


def load_config_file(path):
    """Flat mapping of RunConfig keys from a .json or .toml file."""
    path = Path(path)
    if not path.exists():
        raise IoFailure(f'Config file not found: {path}')
    try:
        if path.suffix == '.toml':
            with open(path, 'rb') as handle:
                data = tomllib.load(handle)
        else:
            data = json.loads(path.read_text())
    except (OSError, ValueError) as e:
        raise ConfigurationError(f'Cannot parse config {path}: {e}') from e
    if not isinstance(data, dict):
        raise ConfigurationError(f'Config {path} must hold a mapping')
    # A [pipeline] table (or "pipeline" object) may wrap the keys.
    data = data.get('pipeline', data)
    return {key.replace('-', '_'): value for key, value in data.items()}


def versions():
    return {
        'nose_heat': __version__,
        'numpy': np.__version__,
        'scipy': scipy.__version__,
        'opencv': cv2.__version__,
        'django': django.get_version(),
    }


def write_manifest(directory, command, config, **extra):
    """Config, inputs and versions of one run; no timestamps so reruns are byte-identical."""
    path = Path(directory) / MANIFEST_FILE
    manifest = {
        'command': command,
        'config': config.as_dict(),
        'versions': versions(),
        **extra,
    }
    try:
        with atomic_write(path, 'w') as handle:
            json.dump(manifest, handle, indent=2, sort_keys=True, default=str)
    except OSError as e:
        raise IoFailure(f'Cannot write manifest {path}: {e}') from e
    logger.debug(f'Manifest written to {path}')
    return path
