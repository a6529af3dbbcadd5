import logging

from django.db.models.signals import post_delete, post_save
from django.dispatch import receiver

from .models import Participant, SessionRecord

logger = logging.getLogger('studies')


@receiver(post_save, sender=Participant)
def log_participant_changes(sender, instance, created, **kwargs):
    if created:
        logger.info(f'Participant registered: {instance.participant_id}')


@receiver(post_save, sender=SessionRecord)
def log_session_changes(sender, instance, created, **kwargs):
    """Log session metric uploads and re-uploads"""
    action = 'stored' if created else 'updated'
    logger.info(
        f'Session {action}: {instance.participant.participant_id} / {instance.session_label} '
        f'(normalization={instance.normalization}, pSQI={instance.psqi})'
    )


@receiver(post_delete, sender=SessionRecord)
def log_session_deletion(sender, instance, **kwargs):
    logger.warning(f'Session deleted: {instance.session_label} (ID: {instance.id})')
