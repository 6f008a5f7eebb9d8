from pathlib import Path
from decouple import config

BASE_DIR = Path(__file__).resolve().parent.parent


SECRET_KEY = config('SECRET_KEY', default='reclab-local-only')

DEBUG = config('DEBUG', default=False, cast=bool)

INSTALLED_APPS = [
    'rest_framework',
    'reclab',
]

# The benchmark keeps everything in memory and on disk as JSON/CSV.
DATABASES = {}

REST_FRAMEWORK = {
    'STRICT_JSON': True,
    'COMPACT_JSON': False,
    'DEFAULT_AUTHENTICATION_CLASSES': [],
    'UNAUTHENTICATED_USER': None,
}

RECLAB = {
    'THREADS': config('RECLAB_THREADS', default=1, cast=int),
    'OUTPUT_DIR': config('RECLAB_OUTPUT_DIR', default='runs'),
}

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'simple': {
            'format': '%(asctime)s %(levelname)s %(name)s: %(message)s',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'simple',
        },
    },
    'loggers': {
        'reclab': {
            'handlers': ['console'],
            'level': config('RECLAB_LOG_LEVEL', default='INFO'),
            'propagate': False,
        },
    },
}
