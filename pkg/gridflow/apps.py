from django.apps import AppConfig


class GridflowConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'gridflow'
    verbose_name = 'Distributed DC-OPF simulator'
