import math
import re
from collections import namedtuple

from django import forms
from django.core.exceptions import NON_FIELD_ERRORS, ValidationError

from django_oppsched.choices import BinLaw, RateLaw, SimScheme, ThresholdRule
from django_oppsched.simulator import Distribution, QosSpec
from django_oppsched.utils import get_option

Target = namedtuple("Target", ["rule", "value"])

Sweep = namedtuple("Sweep", ["axis", "values"])

NUMBER = r"\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*"

UNIFORM_RE = re.compile(rf"^uniform\({NUMBER},{NUMBER}\)$")

PROPORTIONAL_RE = re.compile(rf"^proportional\({NUMBER}\)$")

SWEEP_AXES = ("k", "K", "l", "scheme")

GAUSSIAN_RULES = (
    ThresholdRule.GAUSSIAN_EXACT,
    ThresholdRule.GAUSSIAN_SERIES,
    ThresholdRule.GUMBEL,
)


def parse_number(value, allow_infinite=False):
    try:
        number = float(value)
    except (TypeError, ValueError) as e:
        raise ValidationError(f"'{value}' is not a number") from e
    if math.isnan(number) or (not allow_infinite and math.isinf(number)):
        raise ValidationError(f"'{value}' is not a finite number")
    return number


def parse_target(value):
    """A positive target ``k`` or ``log`` for ``ceil(log K)``"""
    if value.strip() == "log":
        return Target("log", None)
    number = parse_number(value)
    if not number > 0:
        raise ValidationError("k must be positive")
    return Target("fixed", number)


def parse_bins(value):
    """A positive bin count or ``k_squared`` for ``ceil(k)**2``"""
    if value.strip() == "k_squared":
        return Target("k_squared", None)
    try:
        number = int(value)
    except ValueError as e:
        raise ValidationError(f"'{value}' is not an integer") from e
    if number < 1:
        raise ValidationError("l must be at least 1")
    return Target("fixed", number)


class ThresholdField(forms.CharField):
    """A threshold in capacity units; ``-inf`` forces every user to exceed"""

    def to_python(self, value):
        value = super().to_python(value)
        if value in self.empty_values:
            return None
        return parse_number(value, allow_infinite=True)


class TargetField(forms.CharField):
    def to_python(self, value):
        value = super().to_python(value)
        if value in self.empty_values:
            return None
        return parse_target(value)


class BinsField(forms.CharField):
    def to_python(self, value):
        value = super().to_python(value)
        if value in self.empty_values:
            return None
        return parse_bins(value)


class DistributionField(forms.CharField):
    """
    A fixed number or ``uniform(low, high)``.

    With ``positive=True`` every value the distribution can take must be
    strictly positive.
    """

    def __init__(self, positive=False, *args, **kwargs):
        self.positive = positive
        super().__init__(*args, **kwargs)

    def to_python(self, value):
        value = super().to_python(value)
        if value in self.empty_values:
            return None
        match = UNIFORM_RE.match(value)
        if match:
            low, high = (float(group) for group in match.groups())
            distribution = Distribution("uniform", low, high)
        else:
            distribution = Distribution("fixed", parse_number(value))
        if self.positive and not distribution.low > 0:
            raise ValidationError(f"'{value}' must be strictly positive")
        return distribution


class QosField(forms.CharField):
    """A probability, ``equal`` or ``proportional(scale)``"""

    def to_python(self, value):
        value = super().to_python(value)
        if value in self.empty_values:
            return None
        if value == "equal":
            return QosSpec("equal")
        match = PROPORTIONAL_RE.match(value)
        if match:
            scale = float(match.group(1))
            if not 0 < scale < 1:
                raise ValidationError("QoS scale must be in (0, 1)")
            return QosSpec("proportional", scale)
        probability = parse_number(value)
        if not 0 < probability < 1:
            raise ValidationError("QoS probability must be in (0, 1)")
        return QosSpec("fixed", probability)


class SweepField(forms.CharField):
    """``axis=v1,v2,...`` over ``k``, ``K``, ``l`` or ``scheme``"""

    def to_python(self, value):
        value = super().to_python(value)
        if value in self.empty_values:
            return None
        axis, sep, raw = value.partition("=")
        axis = axis.strip()
        if not sep or axis not in SWEEP_AXES:
            raise ValidationError(
                f"Sweep must read axis=values with axis in {SWEEP_AXES}"
            )
        items = [item.strip() for item in raw.split(",") if item.strip()]
        if not items:
            return None
        if axis == "k":
            values = [parse_target(item) for item in items]
        elif axis == "l":
            values = [parse_bins(item) for item in items]
        elif axis == "K":
            try:
                values = [int(item) for item in items]
            except ValueError as e:
                raise ValidationError("K values must be integers") from e
            if min(values) < 2:
                raise ValidationError("K values must be at least 2")
        else:
            unknown = set(items) - set(SimScheme.values)
            if unknown:
                raise ValidationError(f"Unknown schemes {sorted(unknown)}")
            values = items
        return Sweep(axis, tuple(values))


class ScenarioForm(forms.Form):
    id = forms.CharField(required=False)
    K = forms.IntegerField(min_value=2)
    scheme = forms.ChoiceField(choices=SimScheme.choices)
    threshold_rule = forms.ChoiceField(
        choices=ThresholdRule.choices, required=False
    )
    k = TargetField(required=False)
    u = ThresholdField(required=False)
    l = BinsField(required=False)  # noqa: E741
    slots = forms.IntegerField(min_value=1, required=False)
    seed = forms.IntegerField(min_value=0, max_value=2**64 - 1, required=False)
    bin_law = forms.ChoiceField(choices=BinLaw.choices, required=False)
    rate_law = forms.ChoiceField(choices=RateLaw.choices, required=False)
    sweep = SweepField(required=False)

    def clean(self):
        cleaned_data = super().clean()
        scheme = cleaned_data.get("scheme")
        rule = cleaned_data.get("threshold_rule") or get_option(
            "threshold_rule"
        )
        cleaned_data["threshold_rule"] = rule
        bins = cleaned_data.get("l")
        if bins is not None and scheme and scheme != SimScheme.ENHANCED:
            raise ValidationError("l requires scheme=enhanced")
        if scheme == SimScheme.ENHANCED and bins is None:
            raise ValidationError("scheme=enhanced requires l")
        if rule == ThresholdRule.EXPLICIT and cleaned_data.get("u") is None:
            raise ValidationError("threshold_rule=explicit requires u")
        needs_k = rule in GAUSSIAN_RULES or rule == ThresholdRule.RATE_MATCH
        if needs_k and cleaned_data.get("k") is None:
            raise ValidationError(f"threshold_rule={rule} requires k")
        target, K = cleaned_data.get("k"), cleaned_data.get("K")
        if (
            needs_k
            and target is not None
            and target.rule == "fixed"
            and K is not None
            and not target.value < K
        ):
            raise ValidationError(f"k must be below K={K}")
        return cleaned_data


class ProfilesForm(forms.Form):
    mu = DistributionField()
    sigma = DistributionField(positive=True)
    profile_seed = forms.IntegerField(min_value=0, required=False)
    qos = QosField(required=False)


def form_errors(form):
    """Flatten the errors of a bound form into one ValidationError"""
    messages = []
    for name, errors in form.errors.items():
        for error in errors:
            if name == NON_FIELD_ERRORS:
                messages.append(error)
            else:
                messages.append(f"{name}: {error}")
    return ValidationError(messages)
