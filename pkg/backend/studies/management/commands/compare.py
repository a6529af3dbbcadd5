from thermal.exceptions import ConfigurationError
from thermal.management.commands._base import PipelineCommand
from thermal.metrics import METRIC_NAMES

from studies.models import SessionRecord
from studies.reports import build_report, plot_data, read_records, write_report
from studies.serializers import SessionRecordSerializer


class Command(PipelineCommand):
    help = 'Compare sessions per metric: repeated-measures ANOVA plus Bonferroni-adjusted paired t-tests'
    name = 'compare'

    def add_command_arguments(self, parser):
        parser.add_argument('--input', nargs='+', type=str, help='Session record files or directories')
        parser.add_argument('--from-db', action='store_true', help='Compare the stored session records')
        parser.add_argument('--sessions', nargs='+', type=str, help='Session labels in report order')
        parser.add_argument('--metrics', nargs='+', type=str, choices=METRIC_NAMES, help='Metric rows to report')
        parser.add_argument('--emit', type=str, choices=['plotdata'], help='Extra output: boxplot-ready long CSV')

    def load_records(self, options):
        if options.get('from_db'):
            queryset = SessionRecord.objects.select_related('participant')
            return [dict(SessionRecordSerializer(r).data) for r in queryset]
        if not options.get('input'):
            raise ConfigurationError('compare needs --input files or --from-db')
        return read_records(options['input'])

    def run(self, config, output_dir, **options):
        records = self.load_records(options)
        report = build_report(records, metrics=options.get('metrics') or METRIC_NAMES,
                              sessions=options.get('sessions'))
        plotdata = plot_data(records) if options.get('emit') == 'plotdata' else None
        outputs = write_report(report, output_dir, plotdata)

        self.manifest(
            output_dir, config,
            inputs=sorted(str(p) for p in options.get('input') or []) or ['database'],
            participants=report.participants,
            sessions=report.sessions,
            outputs=outputs,
        )
        significant = report.anova[report.anova['marker'] == '*']['metric'].tolist()
        self.success(
            f'Compared {len(report.participants)} participants x {len(report.sessions)} sessions; '
            f'significant: {", ".join(significant) or "none"}'
        )
