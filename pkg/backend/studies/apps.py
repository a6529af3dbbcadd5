from django.apps import AppConfig


class StudiesConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'studies'
    verbose_name = 'Study Sessions and Statistics'

    def ready(self):
        # Register signal handlers
        import studies.signals  # noqa: F401
