import json
from pathlib import Path

import pandas as pd

from thermal.exceptions import ConfigurationError, SignalError
from thermal.metrics import METRIC_NAMES, metric_set, psqi
from thermal.signal_pipeline import person_context, read_signal, reject_outliers
from thermal.utils import atomic_write

from studies.reports import RECORD_COLUMNS, validate_records
from studies.serializers import SessionRecordSerializer

from ._base import PipelineCommand


def parse_self_reports(values):
    reports = {}
    for item in values or []:
        label, sep, score = item.partition('=')
        if not sep:
            raise ConfigurationError(f'--self-report expects LABEL=SCORE, got {item!r}')
        try:
            reports[label] = float(score)
        except ValueError:
            raise ConfigurationError(f'Self-report score for {label} is not a number: {score!r}') from None
    return reports


class Command(PipelineCommand):
    help = 'Compute the 16 thermal variability metrics and pSQI for one person\'s sessions'
    name = 'metrics'

    def add_command_arguments(self, parser):
        parser.add_argument('--input', nargs='+', type=str, required=True, help='Raw signal CSV files, one per session')
        parser.add_argument('--labels', nargs='+', type=str, help='Session labels (default: file names)')
        parser.add_argument('--participant', type=str, default='P01', help='Participant identifier')
        parser.add_argument('--self-report', action='append', dest='self_report', metavar='LABEL=SCORE',
                            help='VAS self-report (0-10) of one session; repeatable')
        parser.add_argument('--rate', type=float, help='Sample rate of signals without a sidecar')
        parser.add_argument('--save', action='store_true', help='Store the session records in the database')

    def run(self, config, output_dir, **options):
        inputs = [Path(p) for p in options['input']]
        labels = options.get('labels') or [p.stem for p in inputs]
        if len(labels) != len(inputs):
            raise ConfigurationError(f'{len(labels)} labels for {len(inputs)} inputs')
        if len(set(labels)) != len(labels):
            raise ConfigurationError(f'Session labels must be unique, got {labels}')
        reports = parse_self_reports(options.get('self_report'))
        unknown = set(reports) - set(labels)
        if unknown:
            raise ConfigurationError(f'Self-report for unknown sessions: {sorted(unknown)}')

        signals = [read_signal(p, options.get('rate')) for p in inputs]
        for path, sig in zip(inputs, signals):
            if sig.filtered or sig.normalized:
                raise SignalError(f'{path} is already filtered or normalized; metrics need the raw signal')
        cleaned = [reject_outliers(sig, config.outlier) for sig in signals]
        context = person_context(cleaned, config.cutoff_hz) if config.pooled else None

        rows = []
        for path, label, sig in zip(inputs, labels, cleaned):
            rows.append({
                'participant_id': options['participant'],
                'session_label': label,
                'self_report': reports.get(label),
                'metrics': metric_set(sig, context, config.cutoff_hz).as_dict(),
                'psqi': psqi(sig, config.band),
                'normalization': config.normalization,
                'source_path': str(path),
            })
        records = validate_records(rows, source='metrics')

        if config.format == 'json':
            outputs = []
            for record in records:
                name = f"{record['participant_id']}_{record['session_label']}.json"
                with atomic_write(output_dir / name, 'w') as handle:
                    json.dump(SessionRecordSerializer(record).data, handle, indent=2, ensure_ascii=False)
                outputs.append(name)
        else:
            table = pd.DataFrame([
                {**{c: r.get(c) for c in RECORD_COLUMNS}, **r['metrics']} for r in records
            ], columns=RECORD_COLUMNS + list(METRIC_NAMES))
            with atomic_write(output_dir / 'metrics.csv', 'w', newline='') as handle:
                table.to_csv(handle, index=False)
            outputs = ['metrics.csv']

        if options.get('save'):
            for row in rows:
                serializer = SessionRecordSerializer(data=row)
                serializer.is_valid(raise_exception=True)
                serializer.save()

        ranges = None
        if context is not None:
            ranges = {
                'raw': [context.raw.lo, context.raw.hi],
                'lowpass': [context.lowpass.lo, context.lowpass.hi],
            }
        self.manifest(
            output_dir, config,
            inputs=[str(p) for p in inputs],
            participant=options['participant'],
            labels=labels,
            normalization_ranges=ranges,
            outputs=outputs,
        )
        self.success(f'Metrics for {len(records)} session(s) of {options["participant"]} written to {output_dir}')
