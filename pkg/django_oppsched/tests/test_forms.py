import math

from django.core.exceptions import ValidationError
from django.test import SimpleTestCase, override_settings

from django_oppsched.forms import (
    BinsField,
    DistributionField,
    ProfilesForm,
    QosField,
    ScenarioForm,
    SweepField,
    Target,
    TargetField,
    ThresholdField,
    form_errors,
)
from django_oppsched.simulator import Distribution, QosSpec


class TestFields(SimpleTestCase):
    def test_empty(self):
        """Test that empty values clean to None"""
        for field in (
            ThresholdField(),
            TargetField(),
            BinsField(),
            DistributionField(),
            QosField(),
            SweepField(),
        ):
            for empty_value in ("", None):
                self.assertIsNone(field.to_python(empty_value))

    def test_threshold(self):
        field = ThresholdField()
        self.assertEqual(field.to_python(" 2.5 "), 2.5)
        self.assertEqual(field.to_python("-inf"), -math.inf)
        for value in ("nan", "high"):
            with self.assertRaises(ValidationError):
                field.to_python(value)

    def test_target(self):
        field = TargetField()
        self.assertEqual(field.to_python("1.5"), Target("fixed", 1.5))
        self.assertEqual(field.to_python("log"), Target("log", None))
        for value in ("0", "-1", "inf"):
            with self.assertRaises(ValidationError):
                field.to_python(value)

    def test_bins(self):
        field = BinsField()
        self.assertEqual(field.to_python("49"), Target("fixed", 49))
        self.assertEqual(
            field.to_python("k_squared"), Target("k_squared", None)
        )
        for value in ("0", "2.5"):
            with self.assertRaises(ValidationError):
                field.to_python(value)

    def test_distribution(self):
        field = DistributionField()
        self.assertEqual(field.to_python("1.5"), Distribution("fixed", 1.5))
        self.assertEqual(
            field.to_python("uniform(0.03, 3)"),
            Distribution("uniform", 0.03, 3.0),
        )
        with self.assertRaises(ValidationError):
            field.to_python("uniform(3, 1)")
        with self.assertRaises(ValidationError):
            field.to_python("normal(0, 1)")

    def test_positive_distribution(self):
        field = DistributionField(positive=True)
        for value in ("0", "uniform(-1, 2)"):
            with self.assertRaisesMessage(
                ValidationError, "must be strictly positive"
            ):
                field.to_python(value)

    def test_qos(self):
        field = QosField()
        self.assertEqual(field.to_python("0.1"), QosSpec("fixed", 0.1))
        self.assertEqual(field.to_python("equal"), QosSpec("equal"))
        self.assertEqual(
            field.to_python("proportional(0.5)"),
            QosSpec("proportional", 0.5),
        )
        for value in ("1", "0", "proportional(2)"):
            with self.assertRaises(ValidationError):
                field.to_python(value)

    def test_sweep(self):
        field = SweepField()
        sweep = field.to_python("K=100, 1000,10000")
        self.assertEqual(sweep.axis, "K")
        self.assertEqual(sweep.values, (100, 1000, 10000))
        sweep = field.to_python("k=0.5,log")
        self.assertEqual(
            sweep.values, (Target("fixed", 0.5), Target("log", None))
        )
        self.assertEqual(
            field.to_python("scheme=baseline,capture").values,
            ("baseline", "capture"),
        )
        self.assertIsNone(field.to_python("k="))

    def test_bad_sweep(self):
        field = SweepField()
        for value in ("seed=1,2", "k", "K=1", "K=1.5", "scheme=aloha"):
            with self.subTest(value=value):
                with self.assertRaises(ValidationError):
                    field.to_python(value)


class TestScenarioForm(SimpleTestCase):
    def test_minimal(self):
        form = ScenarioForm(data={"K": "100", "scheme": "baseline", "k": "1"})
        self.assertTrue(form.is_valid(), form.errors)
        self.assertEqual(form.cleaned_data["threshold_rule"], "gaussian_exact")
        self.assertEqual(form.cleaned_data["k"], Target("fixed", 1.0))

    @override_settings(OPPSCHED_DEFAULT_THRESHOLD_RULE="rate_match")
    def test_default_rule_setting(self):
        form = ScenarioForm(data={"K": "100", "scheme": "baseline", "k": "1"})
        self.assertTrue(form.is_valid(), form.errors)
        self.assertEqual(form.cleaned_data["threshold_rule"], "rate_match")

    def test_cross_field_errors(self):
        cases = {
            "l requires scheme=enhanced": {
                "K": "100",
                "scheme": "baseline",
                "k": "1",
                "l": "4",
            },
            "scheme=enhanced requires l": {
                "K": "100",
                "scheme": "enhanced",
                "k": "1",
            },
            "threshold_rule=explicit requires u": {
                "K": "100",
                "scheme": "baseline",
                "threshold_rule": "explicit",
            },
            "threshold_rule=rate_match requires k": {
                "K": "100",
                "scheme": "baseline",
                "threshold_rule": "rate_match",
            },
            "k must be below K=10": {
                "K": "10",
                "scheme": "baseline",
                "threshold_rule": "rate_match",
                "k": "10",
            },
        }
        for message, data in cases.items():
            with self.subTest(message=message):
                form = ScenarioForm(data=data)
                self.assertFalse(form.is_valid())
                self.assertEqual(form.non_field_errors(), [message])

    def test_field_errors(self):
        form = ScenarioForm(data={"K": "1", "scheme": "aloha"})
        self.assertFalse(form.is_valid())
        self.assertIn("K", form.errors)
        self.assertIn("scheme", form.errors)

    def test_form_errors(self):
        form = ScenarioForm(
            data={"K": "1", "scheme": "baseline", "k": "1", "l": "3"}
        )
        self.assertFalse(form.is_valid())
        messages = form_errors(form).messages
        self.assertTrue(any(m.startswith("K: ") for m in messages))


class TestProfilesForm(SimpleTestCase):
    def test_valid(self):
        form = ProfilesForm(
            data={
                "mu": "uniform(0.41, 2.41)",
                "sigma": "uniform(0.03, 3)",
                "profile_seed": "7",
                "qos": "equal",
            }
        )
        self.assertTrue(form.is_valid(), form.errors)
        self.assertEqual(form.cleaned_data["qos"], QosSpec("equal"))

    def test_sigma_positive(self):
        form = ProfilesForm(data={"mu": "0", "sigma": "0"})
        self.assertFalse(form.is_valid())
        self.assertIn("sigma", form.errors)
