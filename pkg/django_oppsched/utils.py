from importlib import import_module

from django.conf import settings
from django.core.exceptions import ImproperlyConfigured

OPPSCHED_DEFAULTS = {
    "OPPSCHED_DEFAULT_SLOTS": ("slots", 100_000),
    "OPPSCHED_DEFAULT_SEED": ("seed", 0),
    "OPPSCHED_DEFAULT_THRESHOLD_RULE": ("threshold_rule", "gaussian_exact"),
    "OPPSCHED_THREADS": ("threads", 1),
    "OPPSCHED_CHUNK_CELLS": ("chunk_cells", 2**21),
    "OPPSCHED_BIT_GENERATOR": ("bit_generator", "numpy.random.Philox"),
    "OPPSCHED_BINOMIAL_CUTOFF": ("binomial_cutoff", 1e-15),
    "OPPSCHED_CAPTURE_EXACT_LIMIT": ("capture_exact_limit", 5000),
    "OPPSCHED_CAPTURE_SAMPLES": ("capture_samples", 200_000),
    "OPPSCHED_REPORT_DIGITS": ("report_digits", 12),
    "OPPSCHED_REPORT_TIMING": ("report_timing", False),
}


def get_oppsched_default_options():
    options = {}
    for setting, (option, default) in OPPSCHED_DEFAULTS.items():
        options[option] = getattr(settings, setting, default)
    return options


def get_option(name):
    """Single project default, looked up by option name"""
    for setting, (option, default) in OPPSCHED_DEFAULTS.items():
        if option == name:
            return getattr(settings, setting, default)
    raise KeyError(name)


def load_callable(path, kind="object"):
    """Load a class or function from a dotted path"""
    i = path.rfind(".")
    module, attr = path[:i], path[i + 1 :]
    try:
        mod = import_module(module)
    except (ImportError, ValueError) as e:
        error_message = "Error importing %s for django-oppsched %s: '%s'"
        raise ImproperlyConfigured(error_message % (kind, path, e)) from e

    try:
        obj = getattr(mod, attr)
    except AttributeError as e:
        raise ImproperlyConfigured(
            f"Module '{module}' does not define a '{attr}' {kind}"
        ) from e

    return obj


def get_bit_generator():
    """Get the numpy bit generator class named in settings"""
    return load_callable(get_option("bit_generator"), kind="bit generator")
