import logging
from pathlib import Path

from django.core.management.base import BaseCommand, CommandError

from thermal.conf import OUTPUT_FORMATS, NORMALIZATION_SCOPES, RunConfig, parse_pair, write_manifest
from thermal.exceptions import NoseHeatError

logger = logging.getLogger('thermal')


class PipelineCommand(BaseCommand):
    """Shared flags, config layering and exit codes of the pipeline commands."""

    name = None
    seed_point_flags = ('--seed-point',)

    def add_arguments(self, parser):
        parser.add_argument('--config', type=str, help='JSON or TOML file with pipeline settings')
        parser.add_argument('--output', type=str, help='Output directory (default: NOSE_HEAT OUTPUT_DIR)')
        parser.add_argument('--format', type=str, choices=OUTPUT_FORMATS, help='Result format')
        parser.add_argument(*self.seed_point_flags, dest='seed_point', type=str,
                            help='Nose-tip seed as X,Y pixel coordinates')
        parser.add_argument('--cutoff', type=float, help='Low-pass cut-off in Hz (default: 0.08)')
        parser.add_argument('--band', type=str, help='pSQI band as LO,HI in Hz (default: 0.1,0.85)')
        parser.add_argument('--norm', type=str, choices=NORMALIZATION_SCOPES, help='Normalisation scope')
        self.add_command_arguments(parser)

    def add_command_arguments(self, parser):
        pass

    def resolve_config(self, options):
        return RunConfig.resolve(
            options.get('config'),
            output_dir=options.get('output'),
            format=options.get('format'),
            seed_point=options.get('seed_point'),
            cutoff_hz=options.get('cutoff'),
            sqi_band=parse_pair(options['band'], name='band') if options.get('band') else None,
            normalization=options.get('norm'),
        )

    def handle(self, *args, **options):
        try:
            config = self.resolve_config(options)
            output_dir = Path(config.output_dir)
            output_dir.mkdir(parents=True, exist_ok=True)
            options.pop('config', None)  # consumed by resolve_config; clashes with run()'s config
            self.run(config, output_dir, **options)
        except NoseHeatError as e:
            logger.error(f'{self.name} failed ({type(e).__name__}): {e}')
            raise CommandError(f'{type(e).__name__}: {e}', returncode=e.exit_code) from e
        except OSError as e:
            logger.error(f'{self.name} failed: {e}')
            raise CommandError(f'IoFailure: {e}', returncode=2) from e

    def run(self, config, output_dir, **options):
        raise NotImplementedError

    def manifest(self, output_dir, config, **extra):
        return write_manifest(output_dir, self.name, config, **extra)

    def success(self, message):
        self.stdout.write(self.style.SUCCESS(message))
