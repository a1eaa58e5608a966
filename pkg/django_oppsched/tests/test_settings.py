from unittest.mock import patch

import numpy as np
from django.core.exceptions import ImproperlyConfigured
from django.test import SimpleTestCase, override_settings

from django_oppsched.utils import (
    get_bit_generator,
    get_oppsched_default_options,
    get_option,
    load_callable,
)


class TestOppschedOptions(SimpleTestCase):
    def test_defaults(self):
        options = get_oppsched_default_options()
        self.assertEqual(options["slots"], 100_000)
        self.assertEqual(options["seed"], 0)
        self.assertEqual(options["threshold_rule"], "gaussian_exact")
        self.assertEqual(options["threads"], 1)
        self.assertEqual(options["report_digits"], 12)
        self.assertFalse(options["report_timing"])

    @patch("django_oppsched.utils.settings", OPPSCHED_DEFAULT_SLOTS=5000)
    def test_custom_slots(self, settings):
        self.assertEqual(get_oppsched_default_options()["slots"], 5000)

    @patch("django_oppsched.utils.settings", OPPSCHED_THREADS=4)
    def test_custom_threads(self, settings):
        self.assertEqual(get_option("threads"), 4)

    @patch("django_oppsched.utils.settings", spec=[])
    def test_unset(self, settings):
        self.assertEqual(get_option("chunk_cells"), 2**21)
        self.assertEqual(get_option("binomial_cutoff"), 1e-15)

    def test_unknown_option(self):
        with self.assertRaises(KeyError):
            get_option("colour")


class TestBitGenerator(SimpleTestCase):
    def test_default(self):
        self.assertIs(get_bit_generator(), np.random.Philox)

    @override_settings(OPPSCHED_BIT_GENERATOR="numpy.random.SFC64")
    def test_custom(self):
        self.assertIs(get_bit_generator(), np.random.SFC64)

    @override_settings(OPPSCHED_BIT_GENERATOR="no_such_module.Generator")
    def test_bad_module(self):
        with self.assertRaisesMessage(
            ImproperlyConfigured, "Error importing bit generator"
        ):
            get_bit_generator()

    @override_settings(OPPSCHED_BIT_GENERATOR="numpy.random.NoSuchBits")
    def test_bad_attribute(self):
        with self.assertRaisesMessage(
            ImproperlyConfigured, "does not define a 'NoSuchBits'"
        ):
            get_bit_generator()

    def test_load_callable(self):
        self.assertIs(load_callable("numpy.random.PCG64"), np.random.PCG64)
