from django.core.validators import MaxValueValidator, MinValueValidator
from django.db import models


class Participant(models.Model):
    participant_id = models.CharField(max_length=50, unique=True, db_index=True)
    notes = models.TextField(blank=True)
    created_at = models.DateTimeField(auto_now_add=True)

    def __str__(self):
        return self.participant_id

    class Meta:
        verbose_name = 'Participant'
        verbose_name_plural = 'Participants'
        ordering = ['participant_id']


class SessionRecord(models.Model):
    NORMALIZATION_CHOICES = [
        ('pooled', 'Per-person pooled'),
        ('per-session', 'Per session'),
    ]

    participant = models.ForeignKey(Participant, on_delete=models.CASCADE, related_name='sessions')
    session_label = models.CharField(max_length=50, db_index=True)
    # Visual analogue scale, 0-10
    self_report = models.FloatField(
        null=True, blank=True,
        validators=[MinValueValidator(0.0), MaxValueValidator(10.0)],
    )
    metrics = models.JSONField()
    psqi = models.FloatField(
        null=True, blank=True,
        validators=[MinValueValidator(0.0), MaxValueValidator(1.0)],
    )
    normalization = models.CharField(max_length=20, choices=NORMALIZATION_CHOICES, default='pooled')
    source_path = models.CharField(max_length=500, blank=True)
    created_at = models.DateTimeField(auto_now_add=True)
    updated_at = models.DateTimeField(auto_now=True)

    def __str__(self):
        return f'{self.participant.participant_id} / {self.session_label}'

    def as_record(self):
        return {
            'participant_id': self.participant.participant_id,
            'session_label': self.session_label,
            'self_report': self.self_report,
            'metrics': dict(self.metrics),
            'psqi': self.psqi,
            'normalization': self.normalization,
        }

    class Meta:
        verbose_name = 'Session record'
        verbose_name_plural = 'Session records'
        unique_together = ['participant', 'session_label']
        ordering = ['participant__participant_id', 'session_label']
