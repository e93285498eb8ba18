import os

import django

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'cavity_probe.settings')
django.setup()
