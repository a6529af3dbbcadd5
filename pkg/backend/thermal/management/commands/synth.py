import json
from dataclasses import asdict

from thermal.conf import load_config_file
from thermal.exceptions import InvalidSpec
from thermal.frame_io import write_csv_bundle, write_sequence
from thermal.signal_pipeline import write_signal
from thermal.synth import PRESETS, SceneSpec, SignalSpec, gen_cohort, gen_sequence, gen_signal, preset_spec
from thermal.utils import atomic_write

from ._base import PipelineCommand


class Command(PipelineCommand):
    help = 'Generate synthetic signals, thermal scenes or study cohorts together with their ground truth'
    name = 'synth'

    def add_command_arguments(self, parser):
        parser.add_argument('--kind', type=str, choices=['signal', 'scene', 'cohort'], default='signal')
        parser.add_argument('--preset', type=str, choices=sorted(PRESETS), help='Signal preset')
        parser.add_argument('--spec', type=str, help='JSON or TOML file with SignalSpec / SceneSpec fields')
        parser.add_argument('--seed', type=int, help='RNG seed (overrides the spec file)')
        parser.add_argument('--participants', type=int, default=12, help='Cohort size')

    def run(self, config, output_dir, **options):
        params = load_config_file(options['spec']) if options.get('spec') else {}
        if options.get('seed') is not None:
            params['seed'] = options['seed']
        kind = options['kind']

        if kind == 'signal':
            truth, outputs = self.signal(params, options.get('preset'), output_dir)
        elif kind == 'scene':
            truth, outputs = self.scene(params, config.format, output_dir)
        else:
            truth, outputs = self.cohort(params, options['participants'], output_dir)

        with atomic_write(output_dir / 'truth.json', 'w') as handle:
            json.dump(truth, handle, indent=2, sort_keys=True)
        self.manifest(output_dir, config, kind=kind, preset=options.get('preset'),
                      spec=params, outputs=outputs + ['truth.json'])
        self.success(f'Synthetic {kind} written to {output_dir}')

    def signal(self, params, preset, output_dir):
        if preset:
            seed = params.pop('seed', 0)
            spec = preset_spec(preset, seed=seed, **params)
        else:
            spec = SignalSpec.from_dict(params)
        generated = gen_signal(spec)
        write_signal(generated.signal, output_dir / 'signal.csv')
        return generated.truth(), ['signal.csv']

    def scene(self, params, output_format, output_dir):
        scene = gen_sequence(SceneSpec.from_dict(params))
        if output_format == 'csv':
            write_csv_bundle(scene.sequence, output_dir / 'frames')
            outputs = ['frames/']
        else:
            write_sequence(scene.sequence, output_dir / 'sequence.nhtf')
            outputs = ['sequence.nhtf']
        return scene.truth.to_dict(), outputs

    def cohort(self, params, participants, output_dir):
        unknown = set(params) - {'seed', 'duration', 'rate'}
        if unknown:
            raise InvalidSpec(f'Cohort specs accept seed, duration and rate only, got {sorted(unknown)}')
        seed = params.get('seed', 0)
        sessions = gen_cohort(participants, seed=seed,
                              duration=params.get('duration', 300.0), rate=params.get('rate', 4.0))
        outputs, truth = [], {'kind': 'cohort', 'seed': seed, 'sessions': []}
        for session in sessions:
            name = f'{session.participant_id}/{session.session_label}.csv'
            write_signal(session.signal, output_dir / name)
            outputs.append(name)
            truth['sessions'].append({
                'participant_id': session.participant_id,
                'session_label': session.session_label,
                'path': name,
                'spec': asdict(session.spec),
            })
        return truth, outputs
