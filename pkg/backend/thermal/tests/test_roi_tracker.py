import math
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from thermal.exceptions import EmptySequence, InvalidRoi, SeedOutOfBounds
from thermal.frame_io import FrameSequence, ThermalFrame
from thermal.roi_tracker import (
    Roi, TrackerConfig, gradient_map, read_trajectory, select_large_roi, track, write_trajectory,
)
from thermal.synth import SceneSpec, gen_sequence

RATE = float(np.float32(8.7))


def moving_scene(step_px, frames=50, start=(40.0, 60.0), noise=0.0, seed=0, **extra):
    return gen_sequence(SceneSpec(
        duration=frames / 8.7, start=start, velocity=(step_px * RATE, 0.0),
        pixel_noise_sd=noise, seed=seed, **extra,
    ))


def track_scene(scene, cfg=None):
    seq = scene.sequence
    seed = scene.truth.centers[0]
    roi = select_large_roi(seq[0], seed)
    return track(seq, roi, cfg)


class GradientMapTests(SimpleTestCase):
    def test_constant_frame(self):
        grad = gradient_map(ThermalFrame(0.0, np.full((12, 16), 31.5)))
        self.assertEqual(grad.magnitudes.shape, (12, 16))
        self.assertEqual(float(np.abs(grad.magnitudes).max()), 0.0)

    def test_vertical_step(self):
        temps = np.full((8, 8), 30.0)
        temps[:, 4:] = 31.0
        grad = gradient_map(ThermalFrame(0.0, temps)).magnitudes
        # Sobel x kernel: (1 + 2 + 1) * 1 C on both columns touching the step
        expected = np.zeros((8, 8))
        expected[:, 3:5] = 4.0
        np.testing.assert_allclose(grad, expected, atol=1e-12)

    def test_gaussian_blob_ring(self):
        spec = SceneSpec(duration=1 / 8.7, background=30.0, blob_peak=35.0, blob_sigma=8.0)
        scene = gen_sequence(spec)
        grad = gradient_map(scene.sequence[0]).magnitudes
        yy, xx = np.mgrid[0:120, 0:160]
        r = np.hypot(xx - 80.0, yy - 60.0)

        self.assertLess(grad[60, 80], 1e-9)
        ring = grad[(r >= 7.5) & (r <= 8.5)].mean()
        # Sobel approximates 8 x the analytic gradient; |grad G| peaks at r = sigma
        analytic = 8 * 5.0 * math.exp(-0.5) / 8.0
        self.assertAlmostEqual(ring, analytic, delta=0.1 * analytic)
        self.assertGreater(ring, grad[r < 3].mean())
        self.assertGreater(ring, grad[(r > 20) & (r < 30)].mean())


class SelectLargeRoiTests(SimpleTestCase):
    def setUp(self):
        self.frame = ThermalFrame(0.0, np.full((120, 160), 30.0))

    def test_default_size_at_centre(self):
        roi = select_large_roi(self.frame, (80.0, 60.0))
        self.assertEqual((roi.width, roi.height), (25, 17))
        self.assertEqual((roi.center_x, roi.center_y), (80.0, 60.0))

    def test_identity_scale_gives_small_roi(self):
        roi = select_large_roi(self.frame, (80.0, 60.0), scale=(1.0, 1.0))
        self.assertEqual((roi.width, roi.height), (9, 9))

    def test_clamped_near_border(self):
        roi = select_large_roi(self.frame, (1.0, 60.0))
        self.assertEqual(roi.width, 25)
        self.assertEqual(roi.center_x, 12.0)
        self.assertTrue(roi.fits(160, 120))
        self.assertEqual(roi.pixel_bounds()[0], 0)

    def test_seed_outside(self):
        with self.assertRaises(SeedOutOfBounds):
            select_large_roi(self.frame, (-1.0, 5.0))
        with self.assertRaises(SeedOutOfBounds):
            select_large_roi(self.frame, (160.0, 5.0))

    def test_roi_size_must_be_positive(self):
        with self.assertRaises(InvalidRoi):
            Roi(10.0, 10.0, 0, 3)


class TrackTests(SimpleTestCase):
    def test_static_blob(self):
        scene = gen_sequence(SceneSpec(duration=2.0))
        traj = track_scene(scene)
        self.assertEqual(len(traj), len(scene.sequence))
        np.testing.assert_allclose(traj.centers, np.tile([80.0, 60.0], (len(traj), 1)), atol=0.1)
        self.assertTrue(np.all(traj.confidence > 0.99))
        self.assertFalse(traj.low_confidence.any())

    def test_one_pixel_per_frame(self):
        scene = moving_scene(1.0)
        traj = track_scene(scene)
        errors = np.hypot(*(traj.centers - scene.truth.centers).T)
        self.assertLessEqual(errors.mean(), 1.0)

    def test_two_pixels_per_frame_with_noise(self):
        for seed in range(10):
            with self.subTest(seed=seed):
                scene = moving_scene(2.0, start=(30.0, 60.0), noise=0.1, seed=seed)
                traj = track_scene(scene)
                errors = np.hypot(*(traj.centers - scene.truth.centers).T)
                self.assertLessEqual(errors.mean(), 1.5)

    def test_translation_equivariance(self):
        sway = dict(sway_amp=3.0, sway_freq=0.5)
        base = track_scene(moving_scene(0.5, frames=30, start=(50.0, 55.0), **sway))
        shifted = track_scene(moving_scene(0.5, frames=30, start=(57.0, 58.0), **sway))
        np.testing.assert_allclose(shifted.centers - base.centers, np.tile([7.0, 3.0], (30, 1)), atol=0.25)

    def test_step_never_exceeds_max_step(self):
        scene = moving_scene(8.0, frames=10, start=(30.0, 60.0))
        traj = track_scene(scene, TrackerConfig(max_step=5.0))
        steps = np.hypot(*np.diff(traj.centers, axis=0).T)
        self.assertTrue(np.all(steps <= 5.0 + 1e-9))

    def test_confidence_bounded(self):
        traj = track_scene(moving_scene(2.0, frames=20, start=(30.0, 60.0), noise=0.3, seed=4))
        self.assertTrue(np.all((traj.confidence >= -1.0) & (traj.confidence <= 1.0)))

    def test_constant_sequence_degrades_gracefully(self):
        frames = [ThermalFrame(k / 8.7, np.full((120, 160), 30.0)) for k in range(5)]
        seq = FrameSequence(frames, 8.7)
        roi = select_large_roi(seq[0], (80.0, 60.0))
        with self.assertLogs('thermal.roi_tracker', level='WARNING'):
            traj = track(seq, roi)
        self.assertTrue(traj.low_confidence.all())
        np.testing.assert_array_equal(traj.centers, np.tile([80.0, 60.0], (5, 1)))
        np.testing.assert_array_equal(traj.confidence, np.zeros(5))

    def test_empty_sequence(self):
        with self.assertRaises(EmptySequence):
            track(FrameSequence([], 8.7), Roi(10.0, 10.0, 5, 5))

    def test_max_step_below_one_pixel(self):
        with self.assertRaises(InvalidRoi):
            TrackerConfig(max_step=0.5)

    def test_trajectory_csv(self):
        traj = track_scene(moving_scene(1.0, frames=5))
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'trajectory.csv'
            write_trajectory(traj, path)
            header = path.read_text().splitlines()[0]
            self.assertEqual(header, 'frame,timestamp,cx,cy,w,h,confidence,low_conf_flag')
            loaded = read_trajectory(path)
        np.testing.assert_array_equal(loaded.centers, traj.centers)
        np.testing.assert_array_equal(loaded.low_confidence, traj.low_confidence)

    def test_resized_keeps_centres(self):
        traj = track_scene(moving_scene(1.0, frames=5))
        small = traj.resized(9, 9)
        np.testing.assert_array_equal(small.centers, traj.centers)
        self.assertTrue(all(r.width == 9 and r.height == 9 for r in small.rois))
