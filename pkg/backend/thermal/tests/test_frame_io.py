import struct
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from thermal.exceptions import (
    BadMagic, DimensionMismatch, InvalidSequence, IoFailure, NonMonotonicTime, OutOfRangeTemp,
)
from thermal.frame_io import (
    HEADER, FrameSequence, ThermalFrame, read_sequence, write_csv_bundle, write_sequence,
)
from thermal.synth import SceneSpec, gen_sequence


def small_sequence(n_frames=2, width=4, height=4, rate=2.0):
    frames = [
        ThermalFrame(k / rate, 30.0 + 0.1 * np.arange(width * height).reshape(height, width) + k)
        for k in range(n_frames)
    ]
    return FrameSequence(frames, rate)


class FrameIoTests(SimpleTestCase):
    def setUp(self):
        tmp = tempfile.TemporaryDirectory()
        self.addCleanup(tmp.cleanup)
        self.dir = Path(tmp.name)

    def test_two_frame_round_trip_is_byte_identical(self):
        seq = small_sequence()
        path = self.dir / 'two.nhtf'
        write_sequence(seq, path)
        first = path.read_bytes()

        loaded = read_sequence(path)
        self.assertEqual(len(loaded), 2)
        self.assertEqual(loaded, seq)

        write_sequence(loaded, path)
        self.assertEqual(path.read_bytes(), first)

    def test_single_pixel_file_size(self):
        seq = FrameSequence([ThermalFrame(0.0, [[30.0]])], 1.0)
        path = self.dir / 'one.nhtf'
        write_sequence(seq, path)
        self.assertEqual(HEADER.size, 18)
        self.assertEqual(path.stat().st_size, HEADER.size + 8 + 4)

    def test_generated_scene_round_trip(self):
        scene = gen_sequence(SceneSpec(duration=1.0, pixel_noise_sd=0.05, seed=3))
        path = self.dir / 'scene.nhtf'
        write_sequence(scene.sequence, path)
        loaded = read_sequence(path)
        self.assertEqual((loaded.width, loaded.height), (160, 120))
        self.assertEqual(loaded.nominal_rate, float(np.float32(8.7)))
        self.assertEqual(loaded, scene.sequence)

    def test_truncated_payload(self):
        path = self.dir / 'short.nhtf'
        write_sequence(small_sequence(n_frames=10), path)
        record = 8 + 4 * 16
        path.write_bytes(path.read_bytes()[:-record])
        with self.assertRaises(DimensionMismatch):
            read_sequence(path)

    def test_bad_magic(self):
        path = self.dir / 'bad.nhtf'
        write_sequence(small_sequence(), path)
        path.write_bytes(b'PNG\x89' + path.read_bytes()[4:])
        with self.assertRaises(BadMagic):
            read_sequence(path)

    def test_unsupported_version(self):
        path = self.dir / 'v2.nhtf'
        write_sequence(small_sequence(), path)
        data = bytearray(path.read_bytes())
        data[4:6] = struct.pack('<H', 2)
        path.write_bytes(bytes(data))
        with self.assertRaises(BadMagic):
            read_sequence(path)

    def test_non_monotonic_timestamps_in_file(self):
        path = self.dir / 'time.nhtf'
        write_sequence(small_sequence(), path)
        data = bytearray(path.read_bytes())
        second = HEADER.size + 8 + 4 * 16
        data[second:second + 8] = struct.pack('<d', 0.0)
        path.write_bytes(bytes(data))
        with self.assertRaises(NonMonotonicTime):
            read_sequence(path)

    def test_non_finite_timestamp_in_file(self):
        path = self.dir / 'nan.nhtf'
        write_sequence(small_sequence(n_frames=3), path)
        data = bytearray(path.read_bytes())
        second = HEADER.size + 8 + 4 * 16
        data[second:second + 8] = struct.pack('<d', float('nan'))
        path.write_bytes(bytes(data))
        with self.assertRaises(NonMonotonicTime):
            read_sequence(path)
        with self.assertRaises(NonMonotonicTime):
            ThermalFrame(float('inf'), [[30.0]])

    def test_out_of_range_temperature(self):
        with self.assertRaises(OutOfRangeTemp):
            ThermalFrame(0.0, [[30.0, 151.0]])
        with self.assertRaises(OutOfRangeTemp):
            ThermalFrame(0.0, [[30.0, np.nan]])

    def test_mixed_frame_sizes(self):
        frames = [ThermalFrame(0.0, np.full((4, 4), 30.0)), ThermalFrame(1.0, np.full((4, 5), 30.0))]
        with self.assertRaises(DimensionMismatch):
            FrameSequence(frames, 1.0)

    def test_empty_sequence_is_not_writable(self):
        with self.assertRaises(InvalidSequence):
            write_sequence(FrameSequence([], 8.7), self.dir / 'empty.nhtf')

    def test_missing_file_names_the_path(self):
        path = self.dir / 'nowhere.nhtf'
        with self.assertRaises(IoFailure) as cm:
            read_sequence(path)
        self.assertIn(str(path), str(cm.exception))

    def test_csv_bundle(self):
        seq = small_sequence(n_frames=3, width=5, height=3, rate=2.0)
        write_csv_bundle(seq, self.dir / 'bundle')
        self.assertTrue((self.dir / 'bundle' / 'index.csv').exists())
        self.assertTrue((self.dir / 'bundle' / 'frame_000002.csv').exists())

        loaded = read_sequence(self.dir / 'bundle')
        # Rate inferred as (frames - 1) / (t_last - t_first)
        self.assertEqual(loaded.nominal_rate, 2.0)
        self.assertEqual(loaded, seq)

    def test_csv_bundle_with_bad_index(self):
        bundle = self.dir / 'bundle'
        write_csv_bundle(small_sequence(n_frames=2), bundle)
        for index in ('frame,timestamp\n0,zero\n1,0.5\n',
                      'frame,timestamp\nfirst,0.0\n1,0.5\n',
                      'frame,time\n0,0.0\n1,0.5\n'):
            with self.subTest(index=index):
                (bundle / 'index.csv').write_text(index)
                with self.assertRaises(InvalidSequence) as cm:
                    read_sequence(bundle)
                self.assertIn('index.csv', str(cm.exception))

    def test_frames_are_read_only(self):
        frame = small_sequence()[0]
        with self.assertRaises(ValueError):
            frame.temps[0, 0] = 0.0
