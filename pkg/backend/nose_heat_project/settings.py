"""
Django settings for nose_heat_project project.

The project has no web surface: it hosts the thermal pipeline apps, their
management commands (track, metrics, synth, compare) and the session
database used by the statistics.
"""

import os
from pathlib import Path
from dotenv import load_dotenv

# Load environment variables
load_dotenv()

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

SECRET_KEY = os.getenv('DJANGO_SECRET_KEY', 'nose-heat-cli-only-key')

DEBUG = os.getenv('DEBUG', 'False').lower() == 'true'

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    'django.contrib.contenttypes',
    # Third party apps
    'rest_framework',

    # Local apps
    'thermal',
    'studies',
]

MIDDLEWARE = []


# Database
# SQLite unless a PostgreSQL database is configured

USE_SQLITE = os.getenv('USE_SQLITE', 'True').lower() == 'true'

if os.getenv('DB_NAME') and not USE_SQLITE:
    DATABASES = {
        'default': {
            'ENGINE': 'django.db.backends.postgresql',
            'NAME': os.getenv('DB_NAME'),
            'USER': os.getenv('DB_USER', 'postgres'),
            'PASSWORD': os.getenv('DB_PASSWORD', ''),
            'HOST': os.getenv('DB_HOST', 'localhost'),
            'PORT': os.getenv('DB_PORT', '5432'),
        }
    }
else:
    DATABASES = {
        'default': {
            'ENGINE': 'django.db.backends.sqlite3',
            'NAME': os.getenv('SQLITE_PATH') or str(BASE_DIR / 'db.sqlite3'),
        }
    }


# Internationalization

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = False

USE_TZ = True

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'


# Pipeline defaults (overridden by --config files and command-line flags)

def _float_pair(value, default):
    if not value:
        return default
    lo, hi = value.split(',')
    return (float(lo), float(hi))


NOSE_HEAT = {
    'CUTOFF_HZ': float(os.getenv('NOSE_HEAT_CUTOFF_HZ', '0.08')),
    'SQI_BAND': _float_pair(os.getenv('NOSE_HEAT_BAND'), (0.1, 0.85)),
    'NORMALIZATION': os.getenv('NOSE_HEAT_NORM', 'pooled'),
    'OUTLIER_G': float(os.getenv('NOSE_HEAT_OUTLIER_G', '1.5')),
    'OUTLIER_WINDOW_FRACTION': float(os.getenv('NOSE_HEAT_OUTLIER_WINDOW_FRACTION', str(1 / 3))),
    'OUTLIER_MIN_WINDOW_SECONDS': float(os.getenv('NOSE_HEAT_OUTLIER_MIN_WINDOW_SECONDS', '30')),
    'MAX_STEP': float(os.getenv('NOSE_HEAT_MAX_STEP', '5')),
    'MIN_CONFIDENCE': float(os.getenv('NOSE_HEAT_MIN_CONFIDENCE', '0.4')),
    'TEMPLATE_UPDATE': os.getenv('NOSE_HEAT_TEMPLATE_UPDATE', 'anchor'),
    'TEMPLATE_ALPHA': float(os.getenv('NOSE_HEAT_TEMPLATE_ALPHA', '0.05')),
    'ROI_SCALE': _float_pair(os.getenv('NOSE_HEAT_ROI_SCALE'), (2.75, 1.9)),
    'SMALL_ROI': (9, 9),
    'OUTPUT_DIR': os.getenv('NOSE_HEAT_OUTPUT_DIR', 'output'),
    'FORMAT': os.getenv('NOSE_HEAT_FORMAT', 'json'),
}


# Logging

LOG_LEVEL = os.getenv('LOG_LEVEL', 'INFO')

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{levelname} {asctime} {module} {process:d} {thread:d} {message}',
            'style': '{',
        },
        'simple': {
            'format': '{levelname} {message}',
            'style': '{',
        },
    },
    'handlers': {
        'pipeline_file': {
            'level': 'DEBUG',
            'class': 'logging.handlers.RotatingFileHandler',
            'filename': BASE_DIR / 'logs' / 'pipeline.log',
            'maxBytes': 1024*1024*15,  # 15MB
            'backupCount': 10,
            'formatter': 'verbose',
        },
        'console': {
            'level': 'WARNING',
            'class': 'logging.StreamHandler',
            'formatter': 'simple'
        },
    },
    'loggers': {
        'thermal': {
            'handlers': ['pipeline_file', 'console'],
            'level': LOG_LEVEL,
            'propagate': False,
        },
        'studies': {
            'handlers': ['pipeline_file', 'console'],
            'level': LOG_LEVEL,
            'propagate': False,
        },
    },
}

# Create logs directory
os.makedirs(BASE_DIR / 'logs', exist_ok=True)
