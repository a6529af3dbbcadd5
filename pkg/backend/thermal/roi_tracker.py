"""Large nasal ROI selection and gradient-map template tracking.

Pixel (c, r) has its centre at (x=c, y=r). A Roi covers
[cx - w/2, cx + w/2) x [cy - h/2, cy + h/2); the pixels it owns are the
w x h block starting at (ceil(cx - w/2), ceil(cy - h/2)).
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, replace
from pathlib import Path

import cv2
import numpy as np

from .exceptions import EmptyRoi, EmptySequence, InvalidRoi, IoFailure, SeedOutOfBounds
from .utils import atomic_write

logger = logging.getLogger(__name__)

SMALL_ROI = (9, 9)
LARGE_ROI_SCALE = (2.75, 1.9)
MIN_TEMPLATE_SIDE = 3

TRAJECTORY_FIELDS = ['frame', 'timestamp', 'cx', 'cy', 'w', 'h', 'confidence', 'low_conf_flag']


@dataclass(frozen=True)
class Roi:
    center_x: float
    center_y: float
    width: int
    height: int

    def __post_init__(self):
        if int(self.width) != self.width or int(self.height) != self.height:
            raise InvalidRoi(f'ROI size must be integral, got {self.width}x{self.height}')
        if self.width < 1 or self.height < 1:
            raise InvalidRoi(f'ROI size must be positive, got {self.width}x{self.height}')
        object.__setattr__(self, 'width', int(self.width))
        object.__setattr__(self, 'height', int(self.height))
        object.__setattr__(self, 'center_x', float(self.center_x))
        object.__setattr__(self, 'center_y', float(self.center_y))

    @property
    def left(self):
        return math.ceil(self.center_x - self.width / 2)

    @property
    def top(self):
        return math.ceil(self.center_y - self.height / 2)

    def pixel_bounds(self):
        """(x0, y0, x1, y1) of the owned pixel block, end-exclusive."""
        return self.left, self.top, self.left + self.width, self.top + self.height

    def fits(self, frame_width, frame_height):
        x0, y0, x1, y1 = self.pixel_bounds()
        return x0 >= 0 and y0 >= 0 and x1 <= frame_width and y1 <= frame_height

    def moved_to(self, center_x, center_y):
        return replace(self, center_x=center_x, center_y=center_y)

    def clamped(self, frame_width, frame_height):
        """Same size, centre shifted so the rectangle lies inside the frame."""
        width = min(self.width, frame_width)
        height = min(self.height, frame_height)
        cx = min(max(self.center_x, width / 2 - 0.5), frame_width - width / 2 - 0.5)
        cy = min(max(self.center_y, height / 2 - 0.5), frame_height - height / 2 - 0.5)
        return Roi(cx, cy, width, height)


@dataclass(frozen=True, eq=False)
class GradientMap:
    magnitudes: np.ndarray

    @property
    def width(self):
        return self.magnitudes.shape[1]

    @property
    def height(self):
        return self.magnitudes.shape[0]


@dataclass(frozen=True)
class TrackerConfig:
    max_step: float = 5.0
    min_confidence: float = 0.4
    template_update: str = 'anchor'  # 'anchor' | 'blend'
    blend_alpha: float = 0.05

    def __post_init__(self):
        if self.max_step < 1:
            raise InvalidRoi(f'max_step must be >= 1 pixel, got {self.max_step}')
        if self.template_update not in ('anchor', 'blend'):
            raise InvalidRoi(f'Unknown template update policy: {self.template_update}')
        if not 0 < self.blend_alpha <= 1:
            raise InvalidRoi(f'blend_alpha must be in (0, 1], got {self.blend_alpha}')


@dataclass(frozen=True, eq=False)
class RoiTrajectory:
    rois: tuple
    confidence: np.ndarray
    low_confidence: np.ndarray
    timestamps: np.ndarray

    def __len__(self):
        return len(self.rois)

    @property
    def centers(self):
        return np.array([(r.center_x, r.center_y) for r in self.rois])

    def resized(self, width, height):
        """Concentric ROIs of another size, e.g. the small nose-tip ROI."""
        return replace(self, rois=tuple(replace(r, width=width, height=height) for r in self.rois))


def gradient_map(frame):
    """Sobel (3x3) gradient magnitude of the temperature field, edge-replicated borders."""
    temps = frame.temps.astype(np.float64)
    gx = cv2.Sobel(temps, cv2.CV_64F, 1, 0, ksize=3, borderType=cv2.BORDER_REPLICATE)
    gy = cv2.Sobel(temps, cv2.CV_64F, 0, 1, ksize=3, borderType=cv2.BORDER_REPLICATE)
    return GradientMap(np.hypot(gx, gy))


def _odd_size(value):
    return max(MIN_TEMPLATE_SIDE, int(2 * math.floor(value / 2) + 1))


def select_large_roi(frame, seed, scale=LARGE_ROI_SCALE, small_size=SMALL_ROI):
    """Rectangle around the nose-tip seed, enlarged from the small ROI by `scale`."""
    x, y = float(seed[0]), float(seed[1])
    if not (-0.5 <= x < frame.width - 0.5 and -0.5 <= y < frame.height - 0.5):
        raise SeedOutOfBounds(f'Seed ({x}, {y}) is outside the {frame.width}x{frame.height} frame')
    width = _odd_size(small_size[0] * scale[0])
    height = _odd_size(small_size[1] * scale[1])
    roi = Roi(x, y, width, height).clamped(frame.width, frame.height)
    if roi.width < MIN_TEMPLATE_SIDE or roi.height < MIN_TEMPLATE_SIDE:
        raise InvalidRoi(f'Frame {frame.width}x{frame.height} is too small for a tracking ROI')
    if (roi.center_x, roi.center_y) != (x, y):
        logger.info(f'ROI centre shifted from ({x}, {y}) to ({roi.center_x}, {roi.center_y}) to fit the frame')
    return roi


def _patch(magnitudes, x0, y0, width, height):
    return magnitudes[y0:y0 + height, x0:x0 + width]


def _parabolic_offset(left, peak, right):
    denom = left - 2.0 * peak + right
    if denom >= 0:
        return 0.0
    return float(np.clip(0.5 * (left - right) / denom, -0.5, 0.5))


def _match(magnitudes, template, x0, y0, reach):
    """NCC peak of `template` around top-left (x0, y0) within +-reach pixels."""
    th, tw = template.shape
    fh, fw = magnitudes.shape
    sx0, sy0 = max(0, x0 - reach), max(0, y0 - reach)
    sx1, sy1 = min(fw, x0 + reach + tw), min(fh, y0 + reach + th)
    region = magnitudes[sy0:sy1, sx0:sx1]
    if region.shape[0] < th or region.shape[1] < tw:
        return None
    scores = cv2.matchTemplate(region.astype(np.float32), template.astype(np.float32), cv2.TM_CCOEFF_NORMED)
    scores = np.clip(np.nan_to_num(scores, nan=0.0, posinf=0.0, neginf=0.0), -1.0, 1.0)
    row, col = np.unravel_index(int(np.argmax(scores)), scores.shape)
    peak = float(scores[row, col])
    dx = dy = 0.0
    if 0 < col < scores.shape[1] - 1:
        dx = _parabolic_offset(scores[row, col - 1], peak, scores[row, col + 1])
    if 0 < row < scores.shape[0] - 1:
        dy = _parabolic_offset(scores[row - 1, col], peak, scores[row + 1, col])
    return sx0 + col + dx, sy0 + row + dy, peak


def track(seq, initial, cfg=None):
    """Follow `initial` through the sequence by NCC on gradient maps."""
    cfg = cfg or TrackerConfig()
    if not len(seq):
        raise EmptySequence('Cannot track an empty sequence')
    if initial.width < MIN_TEMPLATE_SIDE or initial.height < MIN_TEMPLATE_SIDE:
        raise InvalidRoi(f'Tracking ROI must be at least {MIN_TEMPLATE_SIDE}x{MIN_TEMPLATE_SIDE}')
    if not initial.fits(seq.width, seq.height):
        raise InvalidRoi(f'Initial ROI {initial} does not fit the {seq.width}x{seq.height} frame')

    x0, y0, _, _ = initial.pixel_bounds()
    # Offset between the requested centre and the centre of the owned pixel block.
    off_x = initial.center_x - (x0 + (initial.width - 1) / 2)
    off_y = initial.center_y - (y0 + (initial.height - 1) / 2)

    template = _patch(gradient_map(seq[0]).magnitudes, x0, y0, initial.width, initial.height).copy()
    usable = float(template.std()) > 1e-9
    if not usable:
        logger.warning('Initial ROI has no gradient structure; every frame will be low-confidence')

    reach = int(math.ceil(cfg.max_step))
    rois = [initial]
    confidence = [1.0 if usable else 0.0]
    low = [not usable]
    pos_x, pos_y = float(x0), float(y0)

    for index in range(1, len(seq)):
        magnitudes = gradient_map(seq[index]).magnitudes
        found = None
        if usable:
            found = _match(magnitudes, template, math.floor(pos_x + 0.5), math.floor(pos_y + 0.5), reach)
        score = found[2] if found else 0.0

        if found and score >= cfg.min_confidence:
            step_x, step_y = found[0] - pos_x, found[1] - pos_y
            norm = math.hypot(step_x, step_y)
            if norm > cfg.max_step:
                step_x, step_y = step_x * cfg.max_step / norm, step_y * cfg.max_step / norm
            pos_x = min(max(pos_x + step_x, 0.0), seq.width - initial.width)
            pos_y = min(max(pos_y + step_y, 0.0), seq.height - initial.height)
            flagged = False
            if cfg.template_update == 'blend':
                ix, iy = math.floor(pos_x + 0.5), math.floor(pos_y + 0.5)
                patch = _patch(magnitudes, ix, iy, initial.width, initial.height)
                template = (1.0 - cfg.blend_alpha) * template + cfg.blend_alpha * patch
        else:
            flagged = True

        rois.append(initial.moved_to(
            pos_x + (initial.width - 1) / 2 + off_x,
            pos_y + (initial.height - 1) / 2 + off_y,
        ))
        confidence.append(score)
        low.append(flagged)

    flagged_count = int(np.sum(low))
    if flagged_count:
        logger.warning(f'{flagged_count} of {len(seq)} frames tracked with confidence below {cfg.min_confidence}')
    return RoiTrajectory(
        rois=tuple(rois),
        confidence=np.array(confidence, dtype=np.float64),
        low_confidence=np.array(low, dtype=bool),
        timestamps=seq.timestamps,
    )


def write_trajectory(traj, path):
    try:
        with atomic_write(path, 'w', newline='') as handle:
            writer = csv.writer(handle)
            writer.writerow(TRAJECTORY_FIELDS)
            for index, roi in enumerate(traj.rois):
                writer.writerow([
                    index, repr(float(traj.timestamps[index])),
                    repr(roi.center_x), repr(roi.center_y), roi.width, roi.height,
                    repr(float(traj.confidence[index])), int(traj.low_confidence[index]),
                ])
    except OSError as e:
        raise IoFailure(f'Cannot write trajectory {path}: {e}') from e


def read_trajectory(path):
    try:
        with open(Path(path), newline='') as handle:
            rows = list(csv.DictReader(handle))
    except OSError as e:
        raise IoFailure(f'Cannot read trajectory {path}: {e}') from e
    return RoiTrajectory(
        rois=tuple(Roi(float(r['cx']), float(r['cy']), int(r['w']), int(r['h'])) for r in rows),
        confidence=np.array([float(r['confidence']) for r in rows]),
        low_confidence=np.array([r['low_conf_flag'] == '1' for r in rows], dtype=bool),
        timestamps=np.array([float(r['timestamp']) for r in rows]),
    )
