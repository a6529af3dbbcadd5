from thermal.exceptions import ConfigurationError
from thermal.frame_io import read_sequence
from thermal.roi_tracker import select_large_roi, track, write_trajectory
from thermal.signal_pipeline import extract_signal, write_signal

from ._base import PipelineCommand


class Command(PipelineCommand):
    help = 'Track the large nasal ROI through a thermal sequence and extract its raw signal'
    name = 'track'
    seed_point_flags = ('--seed-point', '--seed')

    def add_command_arguments(self, parser):
        parser.add_argument('--input', type=str, required=True, help='NHTF file or CSV bundle directory')
        parser.add_argument('--rate', type=float, help='Frame rate of a single-frame CSV bundle')

    def run(self, config, output_dir, **options):
        if config.seed_point is None:
            raise ConfigurationError('track needs a nose-tip seed (--seed-point X,Y)')

        seq = read_sequence(options['input'], options.get('rate'))
        roi = select_large_roi(seq[0], config.seed_point, config.roi_scale, config.small_roi)
        traj = track(seq, roi, config.tracker)

        write_trajectory(traj, output_dir / 'trajectory.csv')
        signal = extract_signal(seq, traj)
        write_signal(signal, output_dir / 'signal.csv')
        # Concentric nose-tip ROI for the small-vs-large comparison.
        small = extract_signal(seq, traj.resized(*config.small_roi))
        write_signal(small, output_dir / 'signal_small.csv')

        low = int(traj.low_confidence.sum())
        self.manifest(
            output_dir, config,
            inputs=[str(options['input'])],
            frames=len(seq),
            frame_size=[seq.width, seq.height],
            nominal_rate=seq.nominal_rate,
            initial_roi={'cx': roi.center_x, 'cy': roi.center_y, 'w': roi.width, 'h': roi.height},
            low_confidence_frames=low,
            outputs=['trajectory.csv', 'signal.csv', 'signal_small.csv'],
        )
        self.success(
            f'Tracked {len(seq)} frames ({low} low-confidence); results in {output_dir}'
        )
