"""
Poisson approximation of threshold exceedances.

Each user exceeds a threshold as an independent Poisson stream; over a
single slot (an interval of length ``1/K``) the total exceedance count
is Poisson with mean ``Lambda_T / K``.
"""
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special
from scipy.optimize import brentq
from scipy.stats import poisson

from django_oppsched.choices import RateLaw
from django_oppsched.evt import gumbel_return_level, norm_constants
from django_oppsched.exceptions import DomainError

# Widening steps of ten standard deviations tried on each side of the
# rate-matching bracket.
BRACKET_STEPS = 200


@dataclass(frozen=True)
class UserProfile:
    """Gaussian capacity statistics of one user"""

    mu: float
    sigma: float
    qos_p: float = None

    def __post_init__(self):
        if not self.sigma > 0:
            raise DomainError(f"sigma must be positive, got {self.sigma}")
        if self.qos_p is not None and not 0 < self.qos_p < 1:
            raise DomainError(
                f"QoS exceedance probability must be in (0, 1), "
                f"got {self.qos_p}"
            )


@dataclass(frozen=True)
class RateVector:
    per_user: np.ndarray = field(repr=False)
    total: float
    threshold: object
    K: int
    law: str = RateLaw.EVT

    @property
    def mean_count(self):
        """Expected number of exceedances in one slot"""
        return self.total / self.K

    def shares(self):
        if self.total == 0:
            return np.zeros_like(self.per_user)
        return self.per_user / self.total


def profile_arrays(profiles):
    """Means and standard deviations of ``profiles`` as float arrays"""
    mu = np.fromiter((p.mu for p in profiles), dtype=float)
    sigma = np.fromiter((p.sigma for p in profiles), dtype=float)
    return mu, sigma


def intensity_above(v, xi):
    """Expected number of normalised points above ``v``"""
    v = np.asarray(v, dtype=float)
    with np.errstate(divide="ignore", over="ignore"):
        if xi == 0:
            result = np.exp(-v)
        else:
            result = np.power(np.maximum(1.0 + xi * v, 0.0), -1.0 / xi)
    return float(result) if result.ndim == 0 else result


def gev_cdf_from_intensity(u, xi):
    """``Pr(max <= u)`` as the probability of no point above ``u``"""
    return np.exp(-intensity_above(u, xi))


def _log_rates(u, mu, sigma, K, law):
    z = (u - mu) / sigma
    if law == RateLaw.EVT:
        standard = norm_constants(K)
        return -(z - standard.b) / standard.a
    if law == RateLaw.EXACT:
        return math.log(K) + special.log_ndtr(-z)
    raise DomainError(f"Unknown rate law '{law}'")


def _check_K(K):
    if not K >= 2:
        raise DomainError(f"Rates are normalised over K >= 2 users, got {K}")


def user_rate(u, profile, K):
    """
    Average exceedance rate of one user over ``K`` slots.

    ``exp(-(u - (sigma * b_K + mu)) / (sigma * a_K))``; underflows to zero
    for very high thresholds.
    """
    _check_K(K)
    with np.errstate(over="ignore"):
        return float(
            np.exp(_log_rates(u, profile.mu, profile.sigma, K, RateLaw.EVT))
        )


def exact_user_rate(u, profile, K):
    """``K`` times the exact Gaussian survival at ``u``"""
    _check_K(K)
    return float(K * special.ndtr(-(u - profile.mu) / profile.sigma))


def total_rate(u, profiles, K=None, law=RateLaw.EVT):
    """
    Per-user and total exceedance rates.

    ``u`` is a common threshold or one threshold per user.
    """
    profiles = list(profiles)
    if not profiles:
        raise DomainError("At least one user profile is required")
    if K is None:
        K = len(profiles)
    elif K != len(profiles):
        raise DomainError(
            f"K={K} does not match the {len(profiles)} profiles given"
        )
    _check_K(K)
    mu, sigma = profile_arrays(profiles)
    thresholds = np.asarray(u, dtype=float)
    if thresholds.ndim and thresholds.shape != mu.shape:
        raise DomainError("Need one threshold per user")
    with np.errstate(over="ignore"):
        per_user = np.exp(_log_rates(thresholds, mu, sigma, K, law))
    return RateVector(
        per_user=per_user,
        total=math.fsum(per_user),
        threshold=u,
        K=K,
        law=law,
    )


def log_total_rate(u, profiles, K=None, law=RateLaw.EVT):
    profiles = list(profiles)
    K = K or len(profiles)
    mu, sigma = profile_arrays(profiles)
    return float(special.logsumexp(_log_rates(u, mu, sigma, K, law)))


def _widen(excess, bound, step, target):
    """Move ``bound`` by ``step`` until ``excess`` changes sign across it"""
    sign = -1 if step < 0 else 1
    for _ in range(BRACKET_STEPS):
        if sign * excess(bound) <= 0:
            return bound
        bound += step
    raise DomainError(f"No threshold brackets target rate {target}")


def rate_matched_threshold(profiles, target, K=None, law=RateLaw.EVT):
    """Common threshold ``u`` with ``Lambda_T(u) / K = target``"""
    profiles = list(profiles)
    if not profiles:
        raise DomainError("At least one user profile is required")
    if not target > 0:
        raise DomainError(f"Target rate must be positive, got {target}")
    K = K or len(profiles)
    _check_K(K)
    if law == RateLaw.EXACT and not target < K:
        # exact rates are capped at K per user, so the mean stays below K
        raise DomainError(
            f"Exact rates cannot reach {target} exceedances per slot "
            f"with K={K}"
        )
    mu, sigma = profile_arrays(profiles)
    goal = math.log(target * K)

    def excess(u):
        return log_total_rate(u, profiles, K, law) - goal

    step = 10 * float(sigma.max())
    lo = _widen(excess, float(np.min(mu - 10 * sigma)), -step, target)
    hi = _widen(excess, float(np.max(mu + 40 * sigma)), step, target)
    return brentq(excess, lo, hi, xtol=1e-13, rtol=4 * np.finfo(float).eps)


def qos_threshold(profile, form="constants"):
    """Per-user threshold exceeded with the profile's QoS probability"""
    if profile.qos_p is None:
        raise DomainError("Profile carries no QoS exceedance probability")
    return gumbel_return_level(
        profile.qos_p, profile.mu, profile.sigma, form=form
    )


def qos_rate(profile, K):
    """
    Exceedance rate of a user held to its own QoS threshold.

    The threshold is substituted into :func:`user_rate`; see
    :func:`qos_rate_closed_form` for the displayed closed form.
    """
    return user_rate(qos_threshold(profile), profile, K)


def qos_rate_closed_form(profile, K):
    """
    ``exp(-(b_K + b_{1/p}) / a_K) * (-log(1 - p))^{a_{1/p}}``.

    Differs from direct substitution in the exponent and in the sign of
    the location terms; kept for comparison only.
    """
    if profile.qos_p is None:
        raise DomainError("Profile carries no QoS exceedance probability")
    _check_K(K)
    p = profile.qos_p
    users = norm_constants(K)
    blocks = norm_constants(1.0 / p)
    return math.exp(-(users.b + blocks.b) / users.a) * (
        -math.log1p(-p)
    ) ** blocks.a


def count_pmf(rate_total, K, count):
    """Probability of ``count`` exceedances in one slot"""
    return float(poisson.pmf(count, rate_total / K))
