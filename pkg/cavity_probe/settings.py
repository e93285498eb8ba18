from pathlib import Path
from decouple import config, Csv

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

# SECURITY WARNING: keep the secret key used in production secret!
SECRET_KEY = config('SECRET_KEY', default='django-insecure-cavity-probe-key-12345')

DEBUG = config('DEBUG', default=True, cast=bool)

ALLOWED_HOSTS = config('ALLOWED_HOSTS', default='localhost,127.0.0.1', cast=Csv())

# Application definition
DJANGO_APPS = [
    'django.contrib.contenttypes',
]

LOCAL_APPS = [
    'probing',
]

INSTALLED_APPS = DJANGO_APPS + LOCAL_APPS

# Plot scripts are rendered from probing/jinja2/
TEMPLATES = [
    {
        'BACKEND': 'django.template.backends.jinja2.Jinja2',
        'DIRS': [],
        'APP_DIRS': True,
        'OPTIONS': {
            'autoescape': False,
            'keep_trailing_newline': True,
        },
    },
]

# Database (only used by the test runner bookkeeping; results live in flat files)
DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': BASE_DIR / 'db.sqlite3',
    }
}

# Internationalization
LANGUAGE_CODE = 'en-us'
TIME_ZONE = 'UTC'
USE_I18N = False
USE_TZ = True

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'

# Probing Configuration
PROBING_OUTPUT_DIR = config('PROBING_OUTPUT_DIR', default=str(BASE_DIR / 'runs'))
PROBING_MODE_TOL = config('PROBING_MODE_TOL', default=1e-9, cast=float)
PROBING_MODE_CUTOFF = config('PROBING_MODE_CUTOFF', default=200000, cast=int)
PROBING_STALL_TERMS = config('PROBING_STALL_TERMS', default=20, cast=int)
PROBING_DEFAULT_WORKERS = config('PROBING_DEFAULT_WORKERS', default=1, cast=int)

# Celery Configuration
CELERY_BROKER_URL = config('CELERY_BROKER_URL',
                           default='sqla+sqlite:///celery_broker.sqlite3')
CELERY_RESULT_BACKEND = config('CELERY_RESULT_BACKEND',
                               default='db+sqlite:///celery_results.sqlite3')
CELERY_ACCEPT_CONTENT = ['json']
CELERY_TASK_SERIALIZER = 'json'
CELERY_RESULT_SERIALIZER = 'json'
CELERY_TIMEZONE = TIME_ZONE
CELERY_TASK_ALWAYS_EAGER = config('CELERY_TASK_ALWAYS_EAGER', default=True, cast=bool)
CELERY_TASK_EAGER_PROPAGATES = False

# Logging Configuration
LOG_LEVEL = config('LOG_LEVEL', default='INFO')
LOG_FORMAT = config('LOG_FORMAT', default='json')

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'json': {
            '()': 'pythonjsonlogger.jsonlogger.JsonFormatter',
            'format': '%(asctime)s %(levelname)s %(name)s %(message)s',
        },
        'plain': {
            'format': '[%(asctime)s] %(levelname)s %(name)s: %(message)s',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'json' if LOG_FORMAT == 'json' else 'plain',
        },
    },
    'loggers': {
        'probing': {
            'handlers': ['console'],
            'level': LOG_LEVEL,
            'propagate': False,
        },
        'celery': {
            'handlers': ['console'],
            'level': LOG_LEVEL,
            'propagate': False,
        },
    },
}
