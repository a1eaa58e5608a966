from django_oppsched.simulator import (
    Distribution,
    ProfileSpec,
    QosSpec,
    ScenarioConfig,
)
from testproject.constants import MU_RANGE, PROFILE_SEED, SIGMA_RANGE


def homogeneous_spec(mu=0.0, sigma=1.0, qos=None):
    return ProfileSpec(
        mu=Distribution("fixed", mu),
        sigma=Distribution("fixed", sigma),
        qos=QosSpec(*qos) if qos else None,
    )


def non_uniform_spec(qos=None):
    return ProfileSpec(
        mu=Distribution("uniform", *MU_RANGE),
        sigma=Distribution("uniform", *SIGMA_RANGE),
        profile_seed=PROFILE_SEED,
        qos=QosSpec(*qos) if qos else None,
    )


def make_config(K, spec=None, **kwargs):
    """A scenario over ``K`` users drawn from ``spec``"""
    spec = spec or homogeneous_spec()
    kwargs.setdefault("scenario_id", "test")
    return ScenarioConfig(
        K=K, profiles=spec.generate(K), profile_spec=spec, **kwargs
    )
