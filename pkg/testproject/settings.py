import os

PROJECT_PATH = os.path.abspath(os.path.dirname(__file__))


DATABASES = {
    "default": {
        "ENGINE": "django.db.backends.sqlite3",
        "NAME": os.path.join(PROJECT_PATH, "django-oppsched.db"),
    }
}
DEFAULT_AUTO_FIELD = "django.db.models.AutoField"

INSTALLED_APPS = [
    "django_oppsched",
    "testproject",
]

LANGUAGE_CODE = "en"

LANGUAGES = (("en", "English"),)

DEBUG = True

USE_TZ = True
SECRET_KEY = "blah"

LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "simple": {"format": "%(levelname)s %(name)s: %(message)s"},
    },
    "handlers": {
        "console": {"class": "logging.StreamHandler", "formatter": "simple"},
    },
    "loggers": {
        "django_oppsched": {
            "handlers": ["console"],
            "level": os.environ.get("OPPSCHED_LOG_LEVEL", "WARNING"),
        },
    },
}

# OPPSCHED_THREADS = 4
# OPPSCHED_BIT_GENERATOR = 'numpy.random.PCG64DXSM'
