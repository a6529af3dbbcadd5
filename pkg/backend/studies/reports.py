"""Session comparison reports built on pandas: one ANOVA row per metric plus post-hoc pairs."""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path

import numpy as np
import pandas as pd

from thermal.exceptions import DegenerateVariance, IncompleteTable, InvalidRecord, IoFailure, ZeroVariance
from thermal.metrics import EXISTING_METRICS, METRIC_NAMES
from thermal.utils import atomic_write

from .serializers import SessionRecordSerializer
from .stats import bonferroni, paired_t, rm_anova, significance_marker

logger = logging.getLogger(__name__)

VAS = 'VAS'
RECORD_COLUMNS = ['participant_id', 'session_label', 'self_report', 'psqi', 'normalization']
SKIPPED_FILES = {'manifest.json', 'report.json', 'truth.json'}
ANOVA_COLUMNS = ['metric', 'df_effect', 'df_error', 'F', 'p', 'partial_eta_sq', 'marker', 'existing', 'note']
POSTHOC_COLUMNS = ['metric', 'session_a', 'session_b', 't', 'df', 'p', 'p_bonferroni', 'marker', 'note']


@dataclass(frozen=True, eq=False)
class Report:
    sessions: list
    participants: list
    anova: pd.DataFrame
    posthoc: pd.DataFrame


def validate_records(rows, source=''):
    records = []
    for row in rows:
        serializer = SessionRecordSerializer(data=row)
        if not serializer.is_valid():
            raise InvalidRecord(f'{source}: {json.dumps(serializer.errors)}')
        records.append(dict(serializer.validated_data))
    return records


def _records_from_csv(path):
    frame = pd.read_csv(path, dtype={'participant_id': str, 'session_label': str})
    rows = []
    for item in frame.to_dict(orient='records'):
        row = {
            'participant_id': item['participant_id'],
            'session_label': item['session_label'],
            'metrics': {name: item[name] for name in METRIC_NAMES if name in item},
        }
        for key in ('self_report', 'psqi'):
            value = item.get(key)
            row[key] = None if value is None or (isinstance(value, float) and math.isnan(value)) else value
        if isinstance(item.get('normalization'), str):
            row['normalization'] = item['normalization']
        rows.append(row)
    return rows


def _record_files(path):
    path = Path(path)
    if not path.exists():
        raise IoFailure(f'Input not found: {path}')
    if path.is_dir():
        return sorted(
            p for p in path.iterdir()
            if (p.suffix == '.json' and p.name not in SKIPPED_FILES) or p.name == 'metrics.csv'
        )
    return [path]


def read_records(paths):
    """Validated session records from JSON record files, metrics CSV tables or directories of them."""
    records = []
    for path in paths:
        for name in _record_files(path):
            try:
                if name.suffix == '.csv':
                    rows = _records_from_csv(name)
                else:
                    data = json.loads(name.read_text())
                    rows = data if isinstance(data, list) else [data]
            except (OSError, ValueError, KeyError) as e:
                raise InvalidRecord(f'Cannot read session records from {name}: {e}') from e
            records.extend(validate_records(rows, source=str(name)))
    logger.info(f'Loaded {len(records)} session records')
    return records


def records_frame(records):
    """Long table: one row per participant, session and metric."""
    rows = []
    seen = set()
    for record in records:
        key = (record['participant_id'], record['session_label'])
        if key in seen:
            raise InvalidRecord(f'Duplicate record for participant {key[0]}, session {key[1]}')
        seen.add(key)
        for name in METRIC_NAMES:
            rows.append((*key, name, record['metrics'][name]))
        if record.get('self_report') is not None:
            rows.append((*key, VAS, record['self_report']))
    return pd.DataFrame(rows, columns=['participant_id', 'session_label', 'metric', 'value'])


def _ordered_unique(values):
    return list(dict.fromkeys(values))


def metric_table(long, metric, sessions):
    """Participants x sessions table of one metric; every cell must be present."""
    subset = long[long['metric'] == metric]
    table = subset.pivot(index='participant_id', columns='session_label', values='value')
    table = table.reindex(columns=sessions)
    if table.isna().any().any():
        missing = [
            f'{participant}/{session}'
            for participant, row in table.iterrows()
            for session, value in row.items() if pd.isna(value)
        ]
        raise IncompleteTable(f'{metric}: missing cells {missing}')
    return table


def _anova_row(metric, table):
    row = {
        'metric': metric,
        'df_effect': table.shape[1] - 1,
        'df_error': (table.shape[1] - 1) * (table.shape[0] - 1),
        'F': None, 'p': None, 'partial_eta_sq': None, 'marker': '',
        'existing': metric in EXISTING_METRICS,
        'note': '',
    }
    try:
        result = rm_anova(table.to_numpy())
    except DegenerateVariance as e:
        logger.warning(f'{metric}: {e}')
        row['note'] = 'degenerate'
        return row
    row.update(F=result.F, p=result.p, partial_eta_sq=result.partial_eta_sq,
               marker=significance_marker(result.p))
    return row


def _posthoc_rows(metric, table, sessions):
    pairs = list(combinations(sessions, 2))
    rows = []
    for a, b in pairs:
        row = {'metric': metric, 'session_a': a, 'session_b': b, 't': None, 'df': None,
               'p': None, 'p_bonferroni': None, 'marker': '', 'note': ''}
        try:
            result = paired_t(table[a].to_numpy(), table[b].to_numpy())
        except ZeroVariance:
            row['note'] = 'zero variance'
        else:
            adjusted = bonferroni([result.p], m=len(pairs))[0]
            row.update(t=result.t, df=result.df, p=result.p, p_bonferroni=adjusted,
                       marker=significance_marker(adjusted))
        rows.append(row)
    return rows


def build_report(records, metrics=METRIC_NAMES, sessions=None):
    long = records_frame(records)
    participants = sorted(long['participant_id'].unique())
    sessions = list(sessions) if sessions else _ordered_unique(long['session_label'])
    if len(participants) < 2 or len(sessions) < 2:
        raise IncompleteTable(
            f'Comparison needs >= 2 participants x >= 2 sessions, got {len(participants)} x {len(sessions)}'
        )
    rows = list(metrics)
    # VAS row only when every record carries a self-report.
    if all(r.get('self_report') is not None for r in records):
        rows.append(VAS)

    anova, posthoc = [], []
    for metric in rows:
        table = metric_table(long, metric, sessions)
        anova.append(_anova_row(metric, table))
        posthoc.extend(_posthoc_rows(metric, table, sessions))
    logger.info(f'Report over {len(participants)} participants x {len(sessions)} sessions, {len(rows)} rows')
    return Report(
        sessions=sessions,
        participants=participants,
        anova=pd.DataFrame(anova, columns=ANOVA_COLUMNS),
        posthoc=pd.DataFrame(posthoc, columns=POSTHOC_COLUMNS),
    )


def plot_data(records):
    """Boxplot-ready long table, one value per participant, session and metric."""
    return records_frame(records).sort_values(['metric', 'session_label', 'participant_id'], kind='stable')


def _json_rows(frame):
    rows = frame.to_dict(orient='records')
    for row in rows:
        for key, value in row.items():
            if isinstance(value, (float, np.floating)) and not math.isfinite(value):
                row[key] = None
            elif isinstance(value, np.generic):
                row[key] = value.item()
    return rows


def write_report(report, directory, plotdata=None):
    directory = Path(directory)
    outputs = ['report.json', 'report.csv', 'posthoc.csv']
    try:
        with atomic_write(directory / 'report.json', 'w') as handle:
            json.dump({
                'participants': report.participants,
                'sessions': report.sessions,
                'anova': _json_rows(report.anova),
                'posthoc': _json_rows(report.posthoc),
            }, handle, indent=2, ensure_ascii=False)
        with atomic_write(directory / 'report.csv', 'w', newline='') as handle:
            report.anova.to_csv(handle, index=False)
        with atomic_write(directory / 'posthoc.csv', 'w', newline='') as handle:
            report.posthoc.to_csv(handle, index=False)
        if plotdata is not None:
            with atomic_write(directory / 'plotdata.csv', 'w', newline='') as handle:
                plotdata.to_csv(handle, index=False)
            outputs.append('plotdata.csv')
    except OSError as e:
        raise IoFailure(f'Cannot write report to {directory}: {e}') from e
    return outputs
