from django.apps import AppConfig


class BeamsConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'beams'
    verbose_name = 'Gaussian beams'
