"""
Scenario files.

A scenario is an INI file with two sections::

    [scenario]
    id = unenhanced
    K = 1000
    scheme = baseline
    threshold_rule = gaussian_exact
    k = 1
    slots = 100000
    seed = 0

    [profiles]
    mu = uniform(0.4142, 2.4142)
    sigma = uniform(0.03, 3)
    profile_seed = 7

``[scenario]`` requires ``K`` and ``scheme`` and accepts ``id``,
``threshold_rule``, ``k`` (a number or ``log``), ``u``, ``l`` (a number
or ``k_squared``), ``slots``, ``seed``, ``bin_law``, ``rate_law`` and
``sweep`` (``axis=v1,v2,...``). ``[profiles]`` requires ``mu`` and
``sigma`` (a number or ``uniform(low, high)``) and accepts
``profile_seed`` and ``qos`` (a probability, ``equal`` or
``proportional(scale)``). Any other key is rejected.
"""
import configparser
import io
from collections import namedtuple
from pathlib import Path

from django_oppsched.choices import BinLaw, RateLaw, ThresholdRule
from django_oppsched.exceptions import ScenarioError, ScenarioParseError
from django_oppsched.forms import ProfilesForm, ScenarioForm, form_errors
from django_oppsched.simulator import ProfileSpec, ScenarioConfig
from django_oppsched.utils import get_oppsched_default_options

ScenarioFile = namedtuple("ScenarioFile", ["config", "sweep"])

SECTIONS = {"scenario": ScenarioForm, "profiles": ProfilesForm}


def _new_parser():
    parser = configparser.ConfigParser(
        interpolation=None, inline_comment_prefixes=("#", ";")
    )
    # K and k are different keys
    parser.optionxform = str
    return parser


def _bound_form(parser, section):
    form_class = SECTIONS[section]
    if not parser.has_section(section):
        raise ScenarioParseError(section, f"Section [{section}] is missing")
    data = dict(parser.items(section))
    for key in data:
        if key not in form_class.base_fields:
            raise ScenarioParseError(
                key, f"Unknown scenario key '{key}' in [{section}]"
            )
    for name, field in form_class.base_fields.items():
        if field.required and name not in data:
            raise ScenarioParseError(name)
    form = form_class(data=data)
    if not form.is_valid():
        raise form_errors(form)
    return form.cleaned_data


def parse_scenario(text, source="<scenario>"):
    """Parse and validate scenario text into a :class:`ScenarioFile`"""
    parser = _new_parser()
    try:
        parser.read_string(text, source=source)
    except configparser.Error as e:
        raise ScenarioError(f"Cannot parse {source}: {e}") from e
    for section in parser.sections():
        if section not in SECTIONS:
            raise ScenarioParseError(
                section, f"Unknown section [{section}] in {source}"
            )

    scenario = _bound_form(parser, "scenario")
    profiles = _bound_form(parser, "profiles")
    if (
        scenario["threshold_rule"] == ThresholdRule.PER_USER_QOS
        and profiles["qos"] is None
    ):
        raise ScenarioParseError(
            "qos", "threshold_rule=per_user_qos requires qos in [profiles]"
        )

    options = get_oppsched_default_options()
    spec = ProfileSpec(
        mu=profiles["mu"],
        sigma=profiles["sigma"],
        profile_seed=profiles["profile_seed"] or 0,
        qos=profiles["qos"],
    )
    k = scenario["k"]
    bins = scenario["l"]
    config = ScenarioConfig(
        K=scenario["K"],
        profiles=spec.generate(scenario["K"]),
        scheme=scenario["scheme"],
        threshold_rule=scenario["threshold_rule"],
        k_target=k.value if k else None,
        k_rule=k.rule if k else "fixed",
        bins=bins.value if bins else None,
        bins_rule=bins.rule if bins else "fixed",
        slots=scenario["slots"] or options["slots"],
        seed=options["seed"] if scenario["seed"] is None else scenario["seed"],
        threshold=scenario["u"],
        bin_law=scenario["bin_law"] or BinLaw.EXPONENTIAL,
        rate_law=scenario["rate_law"] or RateLaw.EVT,
        profile_spec=spec,
        scenario_id=scenario["id"] or Path(source).stem,
    )
    return ScenarioFile(config, scenario["sweep"])


def read_scenario(path):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ScenarioError(f"Cannot read scenario {path}: {e}") from e
    return parse_scenario(text, source=str(path))


def load_scenario(path):
    """Fully validated :class:`ScenarioConfig` from a scenario file"""
    return read_scenario(path).config


def _format_target(target):
    if target.rule != "fixed":
        return target.rule
    return repr(target.value) if isinstance(target.value, float) else str(
        target.value
    )


def format_sweep(sweep):
    values = []
    for value in sweep.values:
        values.append(
            _format_target(value) if hasattr(value, "rule") else str(value)
        )
    return f"{sweep.axis}={','.join(values)}"


def serialize_scenario(config, sweep=None):
    """Canonical scenario text; parsing it gives back ``config``"""
    spec = config.profile_spec
    if spec is None:
        raise ScenarioError(
            "Only scenarios with a profile generator can be serialized"
        )
    scenario = {"id": config.scenario_id, "K": str(config.K)}
    scenario["scheme"] = str(config.scheme)
    scenario["threshold_rule"] = str(config.threshold_rule)
    if config.k_rule == "log":
        scenario["k"] = "log"
    elif config.k_target is not None:
        scenario["k"] = repr(float(config.k_target))
    if config.threshold is not None:
        scenario["u"] = repr(float(config.threshold))
    if config.bins_rule == "k_squared":
        scenario["l"] = "k_squared"
    elif config.bins is not None:
        scenario["l"] = str(config.bins)
    scenario["slots"] = str(config.slots)
    scenario["seed"] = str(config.seed)
    scenario["bin_law"] = str(config.bin_law)
    scenario["rate_law"] = str(config.rate_law)
    if sweep:
        scenario["sweep"] = format_sweep(sweep)

    profiles = {"mu": str(spec.mu), "sigma": str(spec.sigma)}
    profiles["profile_seed"] = str(spec.profile_seed)
    if spec.qos is not None:
        profiles["qos"] = str(spec.qos)

    parser = _new_parser()
    parser["scenario"] = scenario
    parser["profiles"] = profiles
    buffer = io.StringIO()
    parser.write(buffer)
    return buffer.getvalue()
