"""
Closed-form capacity and throughput predictions.

Capacities are per slot, in the units of the user profiles. The
``o(a_K)`` correction terms of the asymptotic formulas are dropped.
"""
import logging
import math
from collections import namedtuple
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import special
from scipy.stats import binom

from django_oppsched.choices import RateLaw, ReportScheme
from django_oppsched.evt import (
    expected_max,
    norm_constants,
    threshold_gaussian,
)
from django_oppsched.exceptions import DomainError
from django_oppsched.point_process import (
    profile_arrays,
    qos_threshold,
    total_rate,
)
from django_oppsched.utils import get_option

logger = logging.getLogger(__name__)

SlotProbabilities = namedtuple(
    "SlotProbabilities", ["p_idle", "p_utilized", "p_collision"]
)

CollisionFreeBound = namedtuple("CollisionFreeBound", ["exact", "bound"])


@dataclass(frozen=True)
class AnalyticReport:
    scheme: str
    expected_capacity: float
    p_idle: float
    p_collision: float
    p_utilized: float
    expected_delay_minislots: float = None
    thresholds: object = None
    shares: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        total = self.p_idle + self.p_collision + self.p_utilized
        if abs(total - 1.0) > 1e-9:
            raise DomainError(f"Slot probabilities sum to {total!r}")
        if self.expected_capacity < 0:
            raise DomainError("Expected capacity must be nonnegative")


@dataclass(frozen=True)
class MaxBinReport:
    """
    Distribution of the index ``J`` of the strongest occupied bin.

    ``tail_sum`` is ``sum_j sum_m Pr(m) Pr(J > j | m)`` over
    ``j = 1..l``, which equals ``E[J; m >= 1] - Pr(m >= 1)``.
    ``expected`` is ``E[J | m >= 1]`` and ``pmf[j - 1]`` is
    ``Pr(J = j)``; ``p_any`` is ``Pr(m >= 1)``.
    """

    tail_sum: float
    expected: float
    unconditional: float
    pmf: np.ndarray = field(repr=False)
    p_any: float


def _poisson_slot(mean_count):
    p_idle = math.exp(-mean_count)
    p_utilized = mean_count * p_idle
    p_collision = max(-math.expm1(-mean_count) - p_utilized, 0.0)
    return SlotProbabilities(p_idle, p_utilized, p_collision)


def _check_fraction(k, K):
    if not 0 < k < K:
        raise DomainError(f"Need 0 < k < K, got k={k}, K={K}")


def _check_bins(l):
    if int(l) != l or l < 1:
        raise DomainError(f"Bin count must be a positive integer, got {l}")


def binomial_slot_probabilities(K, k):
    """Exact idle, utilized and collision probabilities for finite ``K``"""
    _check_fraction(k, K)
    p = k / K
    p_idle = math.exp(K * math.log1p(-p))
    p_utilized = K * p * math.exp((K - 1) * math.log1p(-p))
    return SlotProbabilities(
        p_idle, p_utilized, max(1.0 - p_idle - p_utilized, 0.0)
    )


def capacity_homogeneous(K, k, mu=0.0, sigma=1.0, threshold=None):
    """
    Expected capacity with ``k`` of ``K`` i.i.d. users above threshold.

    ``k e^{-k} (u_k + sigma a_K)``. ``threshold`` replaces the exact
    quantile ``u_k`` when another estimator set it.
    """
    _check_fraction(k, K)
    u = threshold_gaussian(K, k, mu, sigma) if threshold is None else threshold
    slot = _poisson_slot(k)
    a = sigma * norm_constants(K).a
    return AnalyticReport(
        scheme=ReportScheme.HOMOGENEOUS,
        expected_capacity=slot.p_utilized * (u + a),
        p_idle=slot.p_idle,
        p_collision=slot.p_collision,
        p_utilized=slot.p_utilized,
        thresholds=u,
    )


def capacity_threshold_vector(
    thresholds,
    profiles,
    scheme=ReportScheme.HETEROGENEOUS,
    rate_law=RateLaw.EVT,
):
    """
    Single-exceedance capacity for a common or per-user threshold.

    ``(L/K) e^{-L/K} sum_i (L_i / L) (u_i + sigma_i a_K)`` with ``L`` the
    total exceedance rate.
    """
    profiles = list(profiles)
    rates = total_rate(thresholds, profiles, law=rate_law)
    K = rates.K
    _, sigma = profile_arrays(profiles)
    a_K = norm_constants(K).a
    shares = rates.shares()
    excess = np.asarray(thresholds, dtype=float) + sigma * a_K
    slot = _poisson_slot(rates.mean_count)
    conditional = math.fsum(shares * excess)
    return AnalyticReport(
        scheme=scheme,
        expected_capacity=slot.p_utilized * conditional,
        p_idle=slot.p_idle,
        p_collision=slot.p_collision,
        p_utilized=slot.p_utilized,
        thresholds=thresholds,
        shares=shares,
    )


def capacity_heterogeneous(u, profiles, rate_law=RateLaw.EVT):
    """Expected capacity of non-identical users sharing threshold ``u``"""
    return capacity_threshold_vector(
        float(u), profiles, ReportScheme.HETEROGENEOUS, rate_law
    )


def capacity_qos(profiles, form="constants", rate_law=RateLaw.EVT):
    """
    Expected capacity when each user holds its own QoS threshold.

    User ``i`` sets the Gumbel return level for its probability ``p_i``
    scaled by its own ``(mu_i, sigma_i)``.
    """
    profiles = list(profiles)
    if not profiles:
        raise DomainError("At least one user profile is required")
    missing = [i for i, p in enumerate(profiles) if p.qos_p is None]
    if missing:
        raise DomainError(
            f"Profiles {missing[:5]} carry no QoS exceedance probability"
        )
    thresholds = np.array([qos_threshold(p, form) for p in profiles])
    return capacity_threshold_vector(
        thresholds, profiles, ReportScheme.QOS, rate_law
    )


def capacity_equal_share(profiles, form="constants", rate_law=RateLaw.EVT):
    """QoS capacity with the same probability ``1/K`` for every user"""
    profiles = list(profiles)
    if not profiles:
        raise DomainError("At least one user profile is required")
    p = 1.0 / len(profiles)
    report = capacity_qos(
        [replace(profile, qos_p=p) for profile in profiles], form, rate_law
    )
    return replace(report, scheme=ReportScheme.EQUAL_SHARE)


def max_of_two_exponentials_mean(s_i, s_j):
    """Mean of the larger of two exponentials with scales ``s_i``, ``s_j``"""
    if s_i < 0 or s_j < 0:
        raise DomainError("Exponential scales must be nonnegative")
    if s_i + s_j == 0:
        return 0.0
    return s_i + s_j - s_i * s_j / (s_i + s_j)


def _harmonic_pair_sum(w, sigma):
    """``sum_{i<j} w_i w_j sigma_i sigma_j / (sigma_i + sigma_j)``"""
    K = len(w)
    block = max(1, 2**20 // K)
    columns = np.arange(K)
    partial = []
    for start in range(0, K, block):
        rows = slice(start, min(start + block, K))
        s_rows = sigma[rows, None]
        pair = (w[rows, None] * w[None, :]) * (
            s_rows * sigma[None, :] / (s_rows + sigma[None, :])
        )
        upper = columns[None, :] > columns[rows, None]
        partial.append(float(pair[upper].sum()))
    return math.fsum(partial)


def _stratified_harmonic_pair_sum(w, sigma, samples, seed, strata=32):
    """Stratified Monte Carlo estimate of :func:`_harmonic_pair_sum`"""
    rng = np.random.default_rng(seed)
    order = np.argsort(sigma, kind="stable")
    groups = np.array_split(order, min(strata, len(order)))
    n_pairs = len(groups) * (len(groups) + 1) // 2
    per_pair = max(1, samples // n_pairs)
    partial = []
    for s, first in enumerate(groups):
        for second in groups[s:]:
            position = rng.integers(len(first), size=per_pair)
            i = first[position]
            if second is first:
                if len(first) < 2:
                    continue
                # a distinct partner inside the same stratum
                offset = rng.integers(1, len(first), size=per_pair)
                j = first[(position + offset) % len(first)]
                count = len(first) * (len(first) - 1) / 2
            else:
                j = second[rng.integers(len(second), size=per_pair)]
                count = len(first) * len(second)
            values = w[i] * w[j] * sigma[i] * sigma[j] / (sigma[i] + sigma[j])
            partial.append(count * float(values.mean()))
    return math.fsum(partial)


def capacity_capture(
    u,
    profiles,
    rate_law=RateLaw.EVT,
    exact_limit=None,
    samples=None,
    seed=0,
):
    """
    Expected capacity when the receiver captures the stronger of two.

    Adds to the single-exceedance term the two-exceedance term
    ``(L/K)^2 e^{-L/K} / 2 * sum_{i<j} 2 L_i L_j / L^2 (u + m_ij a_K)``,
    ``m_ij = sigma_i + sigma_j - sigma_i sigma_j / (sigma_i + sigma_j)``.
    The separable part of the pair sum is evaluated in O(K); the
    harmonic part is exact up to ``exact_limit`` users and estimated by
    stratified sampling above.
    """
    profiles = list(profiles)
    if exact_limit is None:
        exact_limit = get_option("capture_exact_limit")
    if samples is None:
        samples = get_option("capture_samples")
    u = float(u)
    rates = total_rate(u, profiles, law=rate_law)
    K = rates.K
    _, sigma = profile_arrays(profiles)
    a_K = norm_constants(K).a
    w = rates.shares()

    single = math.fsum(w * (u + sigma * a_K))
    w_square = math.fsum(w * w)
    separable = 2.0 * (
        math.fsum(w * sigma) * math.fsum(w) - math.fsum(w * w * sigma)
    )
    if K <= exact_limit:
        harmonic = _harmonic_pair_sum(w, sigma)
    else:
        logger.warning(
            "Estimating the capture pair sum for K=%d by stratified "
            "sampling (%d samples)",
            K,
            samples,
        )
        harmonic = _stratified_harmonic_pair_sum(w, sigma, samples, seed)
    pair = u * (math.fsum(w) - w_square) + a_K * (separable - 2.0 * harmonic)

    lam = rates.mean_count
    slot = _poisson_slot(lam)
    p_pair = 0.5 * lam * lam * slot.p_idle
    capacity = slot.p_utilized * single + p_pair * pair
    p_utilized = slot.p_utilized + p_pair
    return AnalyticReport(
        scheme=ReportScheme.CAPTURE,
        expected_capacity=capacity,
        p_idle=slot.p_idle,
        p_collision=max(1.0 - slot.p_idle - p_utilized, 0.0),
        p_utilized=p_utilized,
        thresholds=u,
        shares=w,
    )


def bin_boundaries(l, K):
    """
    Lower excess offsets ``t_j = a_K log(l / j)`` of bins ``j = 1..l``.

    Bin ``j`` spans ``[t_j, t_{j-1})`` with ``t_0 = inf``; bin 1 holds the
    strongest excesses and ``t_l = 0``. Offsets are in units of the
    user's standard deviation.
    """
    _check_bins(l)
    if K < 2:
        raise DomainError(f"Need K >= 2, got {K}")
    j = np.arange(1, int(l) + 1, dtype=float)
    return norm_constants(K).a * np.log(l / j)


def _binomial_terms(K, k, cutoff=None):
    """
    Support and probabilities of ``Binomial(K, k/K)``.

    Mass beyond the ``cutoff`` quantiles on either side is dropped, which
    bounds the absolute error of a sum of terms bounded by ``c`` by
    ``2 * cutoff * c``.
    """
    if cutoff is None:
        cutoff = get_option("binomial_cutoff")
    p = k / K
    lo = max(int(binom.ppf(cutoff, K, p)) - 1, 0)
    hi = min(int(binom.isf(cutoff, K, p)) + 1, K)
    m = np.arange(lo, hi + 1)
    return m, binom.pmf(m, K, p)


def enhanced_utilized_prob(K, k, l, cutoff=None):
    """
    Probability that one user alone occupies the strongest occupied bin.

    ``sum_j sum_m Binom(K, k/K)(m) m (1/l) ((l - j)/l)^(m - 1)``.
    """
    _check_fraction(k, K)
    _check_bins(l)
    m, pmf = _binomial_terms(K, k, cutoff)
    keep = m >= 1
    m, pmf = m[keep], pmf[keep]
    ratios = (l - np.arange(1, int(l) + 1)) / l
    inner = np.power(ratios[None, :], (m - 1)[:, None]).sum(axis=1)
    return math.fsum(pmf * m / l * inner)


def collision_free_bound(k, l):
    """Probability that ``k`` users land in distinct bins, and its bound"""
    if int(k) != k or k < 1:
        raise DomainError(f"k must be a positive integer, got {k}")
    _check_bins(l)
    if k - 1 >= l:
        exact = 0.0
    else:
        exact = float(np.prod(1.0 - np.arange(1, int(k)) / l))
    return CollisionFreeBound(exact, math.exp(-k * (k - 1) / (2 * l)))


def expected_max_bin(K, k, l, cutoff=None):
    """Distribution and mean of the strongest occupied bin index"""
    _check_fraction(k, K)
    _check_bins(l)
    m, pmf = _binomial_terms(K, k, cutoff)
    keep = m >= 1
    m, pmf = m[keep], pmf[keep]
    j = np.arange(1, int(l) + 1)
    above = np.power(((l - j) / l)[None, :], m[:, None])
    at_or_above = np.power(((l - j + 1) / l)[None, :], m[:, None])

    tail_sum = math.fsum((pmf[:, None] * above).ravel())
    p_any = math.fsum(pmf)
    unconditional = tail_sum + p_any
    return MaxBinReport(
        tail_sum=tail_sum,
        expected=unconditional / p_any if p_any else 0.0,
        unconditional=unconditional,
        pmf=(pmf[:, None] * (at_or_above - above)).sum(axis=0),
        p_any=p_any,
    )


def _bin_excess_means(l):
    # mean of -log(V) for V uniform on ((j - 1)/l, j/l]
    edges = np.arange(int(l) + 1) / l
    xlogx = special.xlogy(edges, edges)
    return 1.0 - l * np.diff(xlogx)


def capacity_enhanced(K, k, l, mu=0.0, sigma=1.0, threshold=None, cutoff=None):
    """
    Expected capacity of the mini-slot collision avoidance scheme.

    Under the exponential excess law the bins are equiprobable, so the
    winner's mean excess in bin ``j`` is ``sigma a_K g_j`` with ``g_j``
    the mean of ``-log V`` over that bin.
    """
    _check_fraction(k, K)
    _check_bins(l)
    u = threshold_gaussian(K, k, mu, sigma) if threshold is None else threshold
    a = sigma * norm_constants(K).a
    m, pmf = _binomial_terms(K, k, cutoff)
    keep = m >= 1
    m, pmf = m[keep], pmf[keep]
    ratios = (l - np.arange(1, int(l) + 1)) / l
    wins = (pmf * m / l)[:, None] * np.power(
        ratios[None, :], (m - 1)[:, None]
    )
    per_bin = wins.sum(axis=0)
    p_utilized = math.fsum(per_bin)
    capacity = math.fsum(per_bin * (u + a * _bin_excess_means(l)))
    p_idle = math.exp(K * math.log1p(-k / K))
    return AnalyticReport(
        scheme=ReportScheme.ENHANCED,
        expected_capacity=capacity,
        p_idle=p_idle,
        p_collision=max(1.0 - p_idle - p_utilized, 0.0),
        p_utilized=p_utilized,
        expected_delay_minislots=expected_max_bin(K, k, l, cutoff).expected,
        thresholds=u,
    )


def capacity_centralized(K, mu=0.0, sigma=1.0):
    """The strongest user scheduled in every slot"""
    return AnalyticReport(
        scheme=ReportScheme.CENTRALIZED,
        expected_capacity=expected_max(K, mu, sigma),
        p_idle=0.0,
        p_collision=0.0,
        p_utilized=1.0,
    )
