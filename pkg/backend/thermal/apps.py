from django.apps import AppConfig


class ThermalConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'thermal'
    verbose_name = 'Nasal Thermal Pipeline'
