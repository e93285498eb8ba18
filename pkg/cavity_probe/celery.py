import os
from celery import Celery

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'cavity_probe.settings')

app = Celery('cavity_probe')

# All celery-related settings carry the CELERY_ prefix in cavity_probe.settings.
app.config_from_object('django.conf:settings', namespace='CELERY')

# Workers for sweep points listen on `-Q probing`.
app.conf.task_routes = {
    'probing.tasks.*': {'queue': 'probing'},
}
app.conf.worker_prefetch_multiplier = 1

app.autodiscover_tasks()
