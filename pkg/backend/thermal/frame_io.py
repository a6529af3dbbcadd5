"""Radiometric frame model and the NHTF / CSV sequence formats.

NHTF layout (little-endian):
    magic  'NHTF'   4 bytes
    version u16     (= 1)
    width   u16
    height  u16
    frame_count u32
    nominal_rate f32
    frame_count x [timestamp f64, width*height f32 temperatures, row-major]
"""
from __future__ import annotations

import csv
import logging
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import (
    BadMagic, DimensionMismatch, InvalidSequence, IoFailure,
    NonMonotonicTime, OutOfRangeTemp,
)
from .utils import atomic_write

logger = logging.getLogger(__name__)

MAGIC = b'NHTF'
VERSION = 1
HEADER = struct.Struct('<4sHHHIf')
TIMESTAMP = struct.Struct('<d')

MIN_TEMP_C = -40.0
MAX_TEMP_C = 150.0

INDEX_FILE = 'index.csv'
FRAME_FILE = 'frame_{:06d}.csv'


def _checked_temps(temps, width=None, height=None):
    grid = np.asarray(temps, dtype=np.float32)
    if width is not None and height is not None:
        if grid.size != width * height:
            raise DimensionMismatch(
                f'Frame holds {grid.size} values, expected {width}x{height}={width * height}'
            )
        grid = grid.reshape(height, width)
    if grid.ndim != 2 or grid.size == 0:
        raise DimensionMismatch(f'Frame must be a non-empty 2-D grid, got shape {grid.shape}')
    if not np.all(np.isfinite(grid)):
        raise OutOfRangeTemp('Frame contains non-finite temperatures')
    lo, hi = float(grid.min()), float(grid.max())
    if lo < MIN_TEMP_C or hi > MAX_TEMP_C:
        raise OutOfRangeTemp(
            f'Temperature outside [{MIN_TEMP_C}, {MAX_TEMP_C}] C: min={lo:.3f}, max={hi:.3f}'
        )
    grid = np.ascontiguousarray(grid)
    grid.setflags(write=False)
    return grid


@dataclass(frozen=True, eq=False)
class ThermalFrame:
    """One radiometric image: temperatures in C on a (height, width) grid."""

    timestamp: float
    temps: np.ndarray

    def __post_init__(self):
        timestamp = float(self.timestamp)
        if not math.isfinite(timestamp):
            raise NonMonotonicTime(f'Frame timestamp must be finite, got {timestamp}')
        object.__setattr__(self, 'timestamp', timestamp)
        object.__setattr__(self, 'temps', _checked_temps(self.temps))

    @classmethod
    def from_flat(cls, width, height, timestamp, values):
        return cls(timestamp, _checked_temps(values, width, height))

    @property
    def width(self):
        return self.temps.shape[1]

    @property
    def height(self):
        return self.temps.shape[0]

    def __eq__(self, other):
        if not isinstance(other, ThermalFrame):
            return NotImplemented
        return (self.timestamp == other.timestamp
                and self.temps.shape == other.temps.shape
                and np.array_equal(self.temps.view(np.uint32), other.temps.view(np.uint32)))

    __hash__ = None


@dataclass(frozen=True, eq=False)
class FrameSequence:
    frames: tuple
    nominal_rate: float

    def __post_init__(self):
        frames = tuple(self.frames)
        object.__setattr__(self, 'frames', frames)
        # The file stores the rate as f32; keep the in-memory value identical.
        object.__setattr__(self, 'nominal_rate', float(np.float32(self.nominal_rate)))
        if not self.nominal_rate > 0 or not math.isfinite(self.nominal_rate):
            raise InvalidSequence(f'nominal_rate must be > 0, got {self.nominal_rate}')
        if frames:
            shape = frames[0].temps.shape
            for index, frame in enumerate(frames):
                if frame.temps.shape != shape:
                    raise DimensionMismatch(
                        f'Frame {index} is {frame.width}x{frame.height}, '
                        f'expected {shape[1]}x{shape[0]}'
                    )
            stamps = np.array([f.timestamp for f in frames])
            if np.any(np.diff(stamps) <= 0):
                bad = int(np.argmax(np.diff(stamps) <= 0)) + 1
                raise NonMonotonicTime(f'Timestamp of frame {bad} does not increase')

    @property
    def width(self):
        return self.frames[0].width

    @property
    def height(self):
        return self.frames[0].height

    @property
    def timestamps(self):
        return np.array([f.timestamp for f in self.frames])

    def __len__(self):
        return len(self.frames)

    def __iter__(self):
        return iter(self.frames)

    def __getitem__(self, index):
        return self.frames[index]

    def __eq__(self, other):
        if not isinstance(other, FrameSequence):
            return NotImplemented
        return self.nominal_rate == other.nominal_rate and self.frames == other.frames

    __hash__ = None


# NHTF binary format

def write_sequence(seq, path):
    if not len(seq):
        raise InvalidSequence('A sequence with zero frames cannot be written')
    path = Path(path)
    try:
        with atomic_write(path, 'wb') as handle:
            handle.write(HEADER.pack(MAGIC, VERSION, seq.width, seq.height, len(seq), seq.nominal_rate))
            for frame in seq:
                handle.write(TIMESTAMP.pack(frame.timestamp))
                handle.write(frame.temps.astype('<f4').tobytes())
    except OSError as e:
        raise IoFailure(f'Cannot write {path}: {e}') from e
    logger.info(f'Wrote {len(seq)} frames ({seq.width}x{seq.height} @ {seq.nominal_rate:g} fps) to {path}')


def _read_nhtf(path):
    try:
        data = Path(path).read_bytes()
    except OSError as e:
        raise IoFailure(f'Cannot read {path}: {e}') from e

    if len(data) < HEADER.size or data[:4] != MAGIC:
        raise BadMagic(f'{path} is not an NHTF file')
    magic, version, width, height, count, rate = HEADER.unpack_from(data, 0)
    if version != VERSION:
        raise BadMagic(f'{path}: unsupported NHTF version {version}')
    if count == 0:
        raise InvalidSequence(f'{path}: header declares zero frames')
    if width == 0 or height == 0:
        raise DimensionMismatch(f'{path}: header declares a {width}x{height} frame')

    pixels = width * height
    record = TIMESTAMP.size + 4 * pixels
    expected = HEADER.size + count * record
    if len(data) != expected:
        whole = (len(data) - HEADER.size) // record
        raise DimensionMismatch(
            f'{path}: header promises {count} frames of {width}x{height}, '
            f'payload holds {whole} ({len(data)} bytes, expected {expected})'
        )

    frames = []
    offset = HEADER.size
    for _ in range(count):
        (stamp,) = TIMESTAMP.unpack_from(data, offset)
        values = np.frombuffer(data, dtype='<f4', count=pixels, offset=offset + TIMESTAMP.size)
        frames.append(ThermalFrame.from_flat(width, height, stamp, values.astype(np.float32)))
        offset += record
    return FrameSequence(frames, rate)


# CSV bundle

def write_csv_bundle(seq, directory):
    if not len(seq):
        raise InvalidSequence('A sequence with zero frames cannot be written')
    directory = Path(directory)
    try:
        for index, frame in enumerate(seq):
            with atomic_write(directory / FRAME_FILE.format(index), 'w', newline='') as handle:
                writer = csv.writer(handle)
                for row in frame.temps:
                    writer.writerow([format(float(v), '.9g') for v in row])
        with atomic_write(directory / INDEX_FILE, 'w', newline='') as handle:
            writer = csv.writer(handle)
            writer.writerow(['frame', 'timestamp'])
            for index, frame in enumerate(seq):
                writer.writerow([index, repr(frame.timestamp)])
    except OSError as e:
        raise IoFailure(f'Cannot write CSV bundle {directory}: {e}') from e


def _read_csv_bundle(directory, nominal_rate=None):
    directory = Path(directory)
    try:
        with open(directory / INDEX_FILE, newline='') as handle:
            rows = list(csv.DictReader(handle))
    except OSError as e:
        raise IoFailure(f'Cannot read {directory / INDEX_FILE}: {e}') from e
    if not rows:
        raise InvalidSequence(f'{directory}: index lists no frames')

    frames = []
    for line, row in enumerate(rows, start=2):
        try:
            index, stamp = int(row['frame']), float(row['timestamp'])
        except (KeyError, TypeError, ValueError) as e:
            raise InvalidSequence(f'{directory / INDEX_FILE}, line {line}: bad frame/timestamp entry ({e})') from e
        name = directory / FRAME_FILE.format(index)
        try:
            grid = np.loadtxt(name, delimiter=',', dtype=np.float64, ndmin=2)
        except OSError as e:
            raise IoFailure(f'Cannot read {name}: {e}') from e
        except ValueError as e:
            raise DimensionMismatch(f'{name}: ragged or non-numeric rows ({e})') from e
        frames.append(ThermalFrame(stamp, grid))

    if nominal_rate is None:
        if len(frames) < 2:
            raise InvalidSequence(f'{directory}: a single-frame bundle needs an explicit rate')
        span = frames[-1].timestamp - frames[0].timestamp
        if span <= 0:
            raise NonMonotonicTime(f'{directory}: timestamps do not increase')
        nominal_rate = (len(frames) - 1) / span
    return FrameSequence(frames, nominal_rate)


def read_sequence(path, nominal_rate=None):
    """Read an NHTF file or a CSV bundle directory into a validated FrameSequence."""
    path = Path(path)
    if not path.exists():
        raise IoFailure(f'Input not found: {path}')
    if path.is_dir():
        seq = _read_csv_bundle(path, nominal_rate)
    else:
        seq = _read_nhtf(path)
    logger.info(f'Read {len(seq)} frames ({seq.width}x{seq.height} @ {seq.nominal_rate:g} fps) from {path}')
    return seq
