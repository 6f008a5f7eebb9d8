from django.apps import AppConfig


class ReclabConfig(AppConfig):
    name = 'reclab'
    verbose_name = 'Recommender benchmark lab'
