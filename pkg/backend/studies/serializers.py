import math

from rest_framework import serializers

from thermal.exceptions import NoseHeatError
from thermal.metrics import METRIC_NAMES, MetricSet, metric_units

from .models import Participant, SessionRecord


class SessionRecordSerializer(serializers.Serializer):
    """One session's metric file: what `metrics` writes and `compare` reads."""

    participant_id = serializers.CharField(max_length=50)
    session_label = serializers.CharField(max_length=50)
    self_report = serializers.FloatField(min_value=0.0, max_value=10.0, required=False, allow_null=True)
    metrics = serializers.DictField(child=serializers.FloatField())
    psqi = serializers.FloatField(min_value=0.0, max_value=1.0, required=False, allow_null=True)
    normalization = serializers.ChoiceField(
        choices=[c[0] for c in SessionRecord.NORMALIZATION_CHOICES], default='pooled',
    )
    units = serializers.DictField(child=serializers.CharField(), required=False)
    source_path = serializers.CharField(max_length=500, required=False, allow_blank=True)

    def validate_metrics(self, value):
        unexpected = sorted(set(value) - set(METRIC_NAMES))
        if unexpected:
            raise serializers.ValidationError(f'Unknown metric names: {unexpected}')
        try:
            return MetricSet(value).as_dict()
        except NoseHeatError as e:
            raise serializers.ValidationError(str(e))

    def validate_self_report(self, value):
        if value is not None and not math.isfinite(value):
            raise serializers.ValidationError('Self-report must be finite')
        return value

    def validate_psqi(self, value):
        if value is not None and not math.isfinite(value):
            raise serializers.ValidationError('pSQI must be finite')
        return value

    def to_representation(self, instance):
        if isinstance(instance, SessionRecord):
            instance = instance.as_record()
        data = {
            'participant_id': instance['participant_id'],
            'session_label': instance['session_label'],
            'self_report': instance.get('self_report'),
            'metrics': {name: instance['metrics'][name] for name in METRIC_NAMES},
            'psqi': instance.get('psqi'),
            'normalization': instance.get('normalization', 'pooled'),
            'units': metric_units(),
        }
        return data

    def create(self, validated_data):
        participant, _ = Participant.objects.get_or_create(participant_id=validated_data['participant_id'])
        record, _ = SessionRecord.objects.update_or_create(
            participant=participant,
            session_label=validated_data['session_label'],
            defaults={
                'self_report': validated_data.get('self_report'),
                'metrics': validated_data['metrics'],
                'psqi': validated_data.get('psqi'),
                'normalization': validated_data.get('normalization', 'pooled'),
                'source_path': validated_data.get('source_path', ''),
            },
        )
        return record
