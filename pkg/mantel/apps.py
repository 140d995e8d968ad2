from django.apps import AppConfig


class MantelConfig(AppConfig):
    name = "mantel"
    verbose_name = "Adaptive Mantel test"
