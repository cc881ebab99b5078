from pathlib import Path
import os

from dotenv import load_dotenv

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

load_dotenv(BASE_DIR / '.env')


# SECURITY WARNING: keep the secret key used in production secret!
SECRET_KEY = os.environ.get('SRRES_SECRET_KEY', 'srres-insecure-local-only')

DEBUG = os.environ.get('SRRES_DEBUG', '0') == '1'

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    'rest_framework',

    'core',
    'network',
    'imaging',
]

# No database: every command and test works on files and in memory.
DATABASES = {}


# Internationalization

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = False

USE_TZ = True


# Super-resolution engine

SRRES_THREADS = int(os.environ.get('SRRES_THREADS') or os.cpu_count() or 1)

SRRES_LOG_LEVEL = os.environ.get('SRRES_LOG_LEVEL', 'INFO')

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '[{levelname}] {name}: {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'verbose',
        },
    },
    'loggers': {
        'core': {'handlers': ['console'], 'level': SRRES_LOG_LEVEL},
        'network': {'handlers': ['console'], 'level': SRRES_LOG_LEVEL},
        'imaging': {'handlers': ['console'], 'level': SRRES_LOG_LEVEL},
    },
}
