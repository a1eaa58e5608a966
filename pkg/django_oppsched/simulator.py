"""
Seeded slot-level Monte Carlo of distributed threshold access.

Random streams
--------------
Slots are simulated in chunks of ``chunk_slots`` slots, fixed by the
scenario and the ``OPPSCHED_CHUNK_CELLS`` setting. Chunk ``c`` of a run
seeded with ``seed`` draws from ``SeedSequence(seed, spawn_key=(c,))``:
its first child feeds the capacity uniforms, slot-major and user-minor
(slot ``s`` of the chunk, user ``i``), its second child feeds the
reservoir keys. Chunks may run on any number of threads and are merged
in chunk order, so results do not depend on the thread count.

Capacities are drawn by inversion: with ``V`` uniform on ``[0, 1)`` a
user sees ``mu + sigma * Phi^{-1}(1 - V)`` and exceeds its threshold
exactly when ``V`` falls below its survival probability.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from functools import reduce

import numpy as np
from django.core.exceptions import ValidationError
from scipy import special

from django_oppsched.analytic import bin_boundaries
from django_oppsched.choices import BinLaw, RateLaw, SimScheme, ThresholdRule
from django_oppsched.evt import (
    threshold_gaussian,
    threshold_gaussian_series,
    threshold_gumbel,
)
from django_oppsched.exceptions import DomainError, ScenarioError
from django_oppsched.point_process import (
    UserProfile,
    profile_arrays,
    qos_threshold,
    rate_matched_threshold,
)
from django_oppsched.utils import get_bit_generator, get_option

logger = logging.getLogger(__name__)

Z_95 = 1.959963984540054

TINY = np.finfo(float).tiny

ESTIMATORS = {
    ThresholdRule.GAUSSIAN_EXACT: threshold_gaussian,
    ThresholdRule.GAUSSIAN_SERIES: threshold_gaussian_series,
    ThresholdRule.GUMBEL: threshold_gumbel,
}


@dataclass(frozen=True)
class Distribution:
    """A fixed value or a uniform range used to generate profiles"""

    kind: str
    low: float
    high: float = None

    def __post_init__(self):
        if self.kind not in ("fixed", "uniform"):
            raise ValidationError(f"Unknown distribution '{self.kind}'")
        if self.kind == "uniform" and not self.low <= self.high:
            raise ValidationError(
                f"uniform({self.low}, {self.high}) has an empty range"
            )

    def __str__(self):
        if self.kind == "fixed":
            return repr(float(self.low))
        return f"uniform({float(self.low)!r}, {float(self.high)!r})"

    def sample(self, rng, size):
        if self.kind == "fixed":
            return np.full(size, float(self.low))
        return rng.uniform(self.low, self.high, size)


@dataclass(frozen=True)
class QosSpec:
    """
    Per-user QoS exceedance probabilities.

    ``fixed`` gives every user ``value``; ``equal`` gives ``1/K``;
    ``proportional`` gives user ``i`` (from 1) ``value * i / K``.
    """

    kind: str
    value: float = None

    def __str__(self):
        if self.kind == "fixed":
            return repr(float(self.value))
        if self.kind == "equal":
            return "equal"
        return f"proportional({float(self.value)!r})"

    def probabilities(self, K):
        if self.kind == "fixed":
            return np.full(K, float(self.value))
        if self.kind == "equal":
            return np.full(K, 1.0 / K)
        return float(self.value) * np.arange(1, K + 1) / K


@dataclass(frozen=True)
class ProfileSpec:
    mu: Distribution
    sigma: Distribution
    profile_seed: int = 0
    qos: QosSpec = None

    @property
    def is_homogeneous(self):
        return self.mu.kind == "fixed" and self.sigma.kind == "fixed"

    def generate(self, K):
        """
        ``K`` reproducible profiles.

        Means are drawn before standard deviations from
        ``default_rng(profile_seed)``.
        """
        rng = np.random.default_rng(self.profile_seed)
        mu = self.mu.sample(rng, K)
        sigma = self.sigma.sample(rng, K)
        qos = self.qos.probabilities(K) if self.qos else [None] * K
        try:
            return tuple(
                UserProfile(
                    float(m), float(s), None if p is None else float(p)
                )
                for m, s, p in zip(mu, sigma, qos)
            )
        except DomainError as e:
            raise ValidationError(str(e)) from e


@dataclass(frozen=True)
class ScenarioConfig:
    K: int
    profiles: tuple = field(repr=False)
    scheme: str = SimScheme.BASELINE
    threshold_rule: str = ThresholdRule.GAUSSIAN_EXACT
    k_target: float = None
    k_rule: str = "fixed"
    bins: int = None
    bins_rule: str = "fixed"
    slots: int = 100_000
    seed: int = 0
    threshold: float = None
    bin_law: str = BinLaw.EXPONENTIAL
    rate_law: str = RateLaw.EVT
    profile_spec: ProfileSpec = None
    scenario_id: str = ""

    def __post_init__(self):
        object.__setattr__(self, "profiles", tuple(self.profiles))
        if len(self.profiles) != self.K:
            raise ValidationError(
                f"K={self.K} does not match the {len(self.profiles)} "
                "profiles"
            )
        if self.slots < 1:
            raise ValidationError("slots must be at least 1")
        has_bins = self.bins is not None or self.bins_rule != "fixed"
        if has_bins and self.scheme != SimScheme.ENHANCED:
            raise ValidationError("l requires scheme=enhanced")
        if self.scheme == SimScheme.ENHANCED and not (self.l or 0) >= 1:
            raise ValidationError("scheme=enhanced requires l >= 1")

    @property
    def k(self):
        """Target mean number of exceedances per slot"""
        if self.k_rule == "log":
            return float(math.ceil(math.log(self.K)))
        return self.k_target

    @property
    def l(self):
        if self.bins_rule == "k_squared":
            if self.k is None:
                return None
            return math.ceil(self.k) ** 2
        return self.bins

    @property
    def is_homogeneous(self):
        first = self.profiles[0]
        return all(
            p.mu == first.mu and p.sigma == first.sigma for p in self.profiles
        )

    def with_K(self, K):
        """The same scenario over ``K`` users drawn from its generator"""
        if self.profile_spec is None:
            raise ScenarioError(
                "Cannot change K of a scenario without a profile generator"
            )
        return replace(self, K=K, profiles=self.profile_spec.generate(K))


def resolve_thresholds(config):
    """One threshold per user according to the scenario's rule"""
    rule = config.threshold_rule
    mu, sigma = profile_arrays(config.profiles)
    try:
        if rule in ESTIMATORS:
            if config.k is None:
                raise ScenarioError(f"threshold_rule={rule} requires k")
            # estimators are affine in (mu, sigma)
            standard = ESTIMATORS[rule](config.K, config.k, 0.0, 1.0)
            return mu + sigma * standard
        if rule == ThresholdRule.EXPLICIT:
            if config.threshold is None:
                raise ScenarioError("threshold_rule=explicit requires u")
            return np.full(config.K, float(config.threshold))
        if rule == ThresholdRule.RATE_MATCH:
            if config.k is None:
                raise ScenarioError("threshold_rule=rate_match requires k")
            u = rate_matched_threshold(
                config.profiles, config.k, law=config.rate_law
            )
            return np.full(config.K, u)
        if rule == ThresholdRule.PER_USER_QOS:
            return np.array([qos_threshold(p) for p in config.profiles])
    except DomainError as e:
        raise ScenarioError(f"Cannot resolve thresholds: {e}") from e
    raise ScenarioError(f"Unknown threshold rule '{rule}'")


@dataclass
class SimStats:
    K: int
    bins: int = 0
    n_slots: int = 0
    idle: int = 0
    utilized: int = 0
    collision: int = 0
    capacity_sum: float = 0.0
    capacity_sq_sum: float = 0.0
    exceedances: int = 0
    wins: np.ndarray = field(default=None, repr=False)
    count_hist: np.ndarray = field(default=None, repr=False)
    delay_hist: np.ndarray = field(default=None, repr=False)
    winner_delay_hist: np.ndarray = field(default=None, repr=False)
    reservoir_cap: int = 0
    excess: np.ndarray = field(default=None, repr=False)
    excess_keys: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.wins is None:
            self.wins = np.zeros(self.K, dtype=np.int64)
        if self.count_hist is None:
            self.count_hist = np.zeros(1, dtype=np.int64)
        if self.delay_hist is None:
            self.delay_hist = np.zeros(self.bins + 1, dtype=np.int64)
        if self.winner_delay_hist is None:
            self.winner_delay_hist = np.zeros(self.bins + 1, dtype=np.int64)
        if self.excess is None:
            self.excess = np.empty(0)
            self.excess_keys = np.empty(0)

    def merge(self, other):
        """Combine the statistics of two disjoint sets of slots"""
        keys = np.concatenate([self.excess_keys, other.excess_keys])
        values = np.concatenate([self.excess, other.excess])
        cap = max(self.reservoir_cap, other.reservoir_cap)
        keep = np.argsort(keys, kind="stable")[:cap]
        return SimStats(
            K=self.K,
            bins=self.bins,
            n_slots=self.n_slots + other.n_slots,
            idle=self.idle + other.idle,
            utilized=self.utilized + other.utilized,
            collision=self.collision + other.collision,
            capacity_sum=self.capacity_sum + other.capacity_sum,
            capacity_sq_sum=self.capacity_sq_sum + other.capacity_sq_sum,
            exceedances=self.exceedances + other.exceedances,
            wins=self.wins + other.wins,
            count_hist=_add_hist(self.count_hist, other.count_hist),
            delay_hist=self.delay_hist + other.delay_hist,
            winner_delay_hist=self.winner_delay_hist + other.winner_delay_hist,
            reservoir_cap=cap,
            excess=values[keep],
            excess_keys=keys[keep],
        )

    def _fraction(self, count):
        return count / self.n_slots if self.n_slots else 0.0

    @property
    def p_idle(self):
        return self._fraction(self.idle)

    @property
    def p_utilized(self):
        return self._fraction(self.utilized)

    @property
    def p_collision(self):
        return self._fraction(self.collision)

    def half_width(self, p):
        """95% normal-approximation half-width of a slot proportion"""
        if not self.n_slots:
            return math.nan
        return Z_95 * math.sqrt(max(p * (1 - p), 0.0) / self.n_slots)

    @property
    def mean_capacity(self):
        return self._fraction(self.capacity_sum)

    @property
    def capacity_half_width(self):
        if not self.n_slots:
            return math.nan
        variance = self.capacity_sq_sum / self.n_slots - self.mean_capacity**2
        return Z_95 * math.sqrt(max(variance, 0.0) / self.n_slots)

    @property
    def mean_exceedances(self):
        return self._fraction(self.exceedances)

    @property
    def mean_delay(self):
        """Mean index of the strongest occupied bin over busy slots"""
        busy = self.delay_hist.sum()
        if not busy:
            return None
        return float(np.arange(len(self.delay_hist)) @ self.delay_hist / busy)

    @property
    def mean_winner_delay(self):
        won = self.winner_delay_hist.sum()
        if not won:
            return None
        index = np.arange(len(self.winner_delay_hist))
        return float(index @ self.winner_delay_hist / won)

    def win_shares(self):
        total = self.wins.sum()
        return self.wins / total if total else self.wins.astype(float)


def _add_hist(first, second):
    size = max(len(first), len(second))
    return np.pad(first, (0, size - len(first))) + np.pad(
        second, (0, size - len(second))
    )


@dataclass(frozen=True)
class SlotOutcome:
    kind: str
    exceeders: int
    winner: int = None
    capacity: float = None
    delay_minislots: int = None


def _outcomes(counts, winner_rows, winner_cols, won, lowest):
    winner = dict(zip(winner_rows.tolist(), zip(winner_cols.tolist(), won)))
    outcomes = []
    for slot, count in enumerate(counts.tolist()):
        delay = None
        if lowest is not None and count:
            delay = int(lowest[slot])
        if slot in winner:
            user, capacity = winner[slot]
            outcomes.append(
                SlotOutcome("utilized", count, user, float(capacity), delay)
            )
        else:
            kind = "collision" if count else "idle"
            outcomes.append(SlotOutcome(kind, count, delay_minislots=delay))
    return outcomes


def _strongest_per_slot(rows, values):
    """Positions of the largest value in each slot, slot order"""
    if not len(rows):
        return np.empty(0, dtype=np.int64)
    order = np.lexsort((values, rows))
    sorted_rows = rows[order]
    last = np.flatnonzero(np.r_[sorted_rows[1:] != sorted_rows[:-1], True])
    return order[last]


class _Run:
    """Per-run constants shared by all chunks"""

    def __init__(self, config, reservoir_cap):
        self.config = config
        self.K = config.K
        self.scheme = config.scheme
        self.thresholds = resolve_thresholds(config)
        self.mu, self.sigma = profile_arrays(config.profiles)
        self.survival = special.ndtr(-(self.thresholds - self.mu) / self.sigma)
        self.bins = config.l if self.scheme == SimScheme.ENHANCED else 0
        if self.bins:
            self.ascending = bin_boundaries(self.bins, self.K)[::-1]
        self.reservoir_cap = reservoir_cap
        self.bit_generator = get_bit_generator()
        self.chunk_slots = max(1, get_option("chunk_cells") // self.K)
        self.n_chunks = math.ceil(config.slots / self.chunk_slots)

    def _streams(self, chunk):
        sequence = np.random.SeedSequence(self.config.seed, spawn_key=(chunk,))
        draws, keys = sequence.spawn(2)
        return (
            np.random.Generator(self.bit_generator(draws)),
            np.random.Generator(self.bit_generator(keys)),
        )

    def _bins(self, v, cols, capacity):
        if self.config.bin_law == BinLaw.EXACT:
            # V / survival is uniform on (0, 1] given the exceedance
            ratio = v / self.survival[cols]
            return np.clip(np.ceil(self.bins * ratio), 1, self.bins).astype(
                np.int64
            )
        excess = (capacity - self.thresholds[cols]) / self.sigma[cols]
        below = np.searchsorted(self.ascending, excess, side="right")
        # rounding can leave an exceeder a hair under its threshold
        return np.minimum(self.bins - below + 1, self.bins)

    def chunk(self, index, trace=False):
        n = min(self.chunk_slots, self.config.slots - index * self.chunk_slots)
        draws, keys = self._streams(index)
        V = draws.random((n, self.K))
        rows, cols = np.nonzero(V < self.survival)
        v = np.maximum(V[rows, cols], TINY)
        del V
        capacity = self.mu[cols] - self.sigma[cols] * special.ndtri(v)
        counts = np.bincount(rows, minlength=n)

        stats = SimStats(
            K=self.K,
            bins=self.bins,
            n_slots=n,
            exceedances=len(rows),
            count_hist=np.bincount(counts),
            idle=int(np.count_nonzero(counts == 0)),
            reservoir_cap=self.reservoir_cap,
        )

        lowest = None
        if self.scheme == SimScheme.BASELINE:
            winners = np.flatnonzero(counts[rows] == 1)
        elif self.scheme == SimScheme.CAPTURE:
            eligible = np.flatnonzero(counts[rows] <= 2)
            winners = eligible[
                _strongest_per_slot(rows[eligible], capacity[eligible])
            ]
        else:
            bins = self._bins(v, cols, capacity)
            lowest = np.full(n, self.bins + 1, dtype=np.int64)
            np.minimum.at(lowest, rows, bins)
            at_lowest = bins == lowest[rows]
            occupancy = np.bincount(rows[at_lowest], minlength=n)
            winners = np.flatnonzero(at_lowest & (occupancy[rows] == 1))
            stats.delay_hist = np.bincount(
                lowest[counts > 0], minlength=self.bins + 1
            )
            stats.winner_delay_hist = np.bincount(
                bins[winners], minlength=self.bins + 1
            )

        won = capacity[winners]
        stats.utilized = len(winners)
        stats.collision = n - stats.idle - stats.utilized
        stats.capacity_sum = math.fsum(won)
        stats.capacity_sq_sum = math.fsum(won * won)
        stats.wins = np.bincount(cols[winners], minlength=self.K)

        if self.reservoir_cap:
            priority = keys.random(len(rows))
            keep = np.argsort(priority, kind="stable")[: self.reservoir_cap]
            stats.excess = capacity[keep] - self.thresholds[cols[keep]]
            stats.excess_keys = priority[keep]

        logger.debug("Chunk %d: %d slots, %d exceedances", index, n, len(rows))
        if trace:
            return stats, _outcomes(
                counts, rows[winners], cols[winners], won, lowest
            )
        return stats


def simulate(config, threads=None, reservoir_cap=0):
    """
    Run ``config`` and return its :class:`SimStats`.

    Deterministic given the configuration, its seed and the chunk size.
    """
    if threads is None:
        threads = get_option("threads")
    run = _Run(config, reservoir_cap)
    logger.info(
        "Simulating %s scheme: K=%d, %d slots in %d chunks",
        config.scheme,
        config.K,
        config.slots,
        run.n_chunks,
    )
    if threads > 1 and run.n_chunks > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(run.chunk, range(run.n_chunks)))
    else:
        chunks = [run.chunk(index) for index in range(run.n_chunks)]
    return reduce(SimStats.merge, chunks)


def trace_slots(config, n_slots):
    """
    Outcomes of the first ``n_slots`` slots of ``config``, one by one.

    Slots are drawn from the same streams as :func:`simulate`.
    """
    run = _Run(config, reservoir_cap=0)
    n_slots = min(n_slots, config.slots)
    outcomes = []
    for index in range(run.n_chunks):
        if len(outcomes) >= n_slots:
            break
        outcomes.extend(run.chunk(index, trace=True)[1])
    return outcomes[:n_slots]


def _require_scheme(config, scheme):
    if config.scheme != scheme:
        raise ScenarioError(
            f"Scenario has scheme={config.scheme}, expected {scheme}"
        )


def run_baseline(config, threads=None):
    """A slot is utilized when exactly one user exceeds its threshold"""
    _require_scheme(config, SimScheme.BASELINE)
    return simulate(config, threads)


def run_capture(config, threads=None):
    """As baseline, the stronger of two exceeders is also received"""
    _require_scheme(config, SimScheme.CAPTURE)
    return simulate(config, threads)


def run_enhanced(config, threads=None):
    """
    Exceeders wait as many mini-slots as their bin index.

    The strongest occupied bin transmits first and silences every weaker
    bin; the slot is utilized when that bin holds a single user.
    """
    _require_scheme(config, SimScheme.ENHANCED)
    return simulate(config, threads)


def collect_excess_samples(config, cap, threads=None):
    """Uniform sample of at most ``cap`` excesses ``C_i - u_i``"""
    if cap <= 0:
        return np.empty(0)
    return simulate(config, threads, reservoir_cap=cap).excess


@dataclass(frozen=True)
class MimoCapacitySample:
    samples: np.ndarray = field(repr=False)
    mean: float
    std: float


def sample_mimo_capacity(r, t, P, n_samples, seed=0, batch=2048):
    """
    Capacities ``log2 det(I_r + (P/t) H H^H)`` of random MIMO channels.

    ``H`` is ``r x t`` with i.i.d. circular complex Gaussian entries of
    unit variance. The determinant is taken over the smaller Gram matrix.
    """
    if r < 1 or t < 1:
        raise DomainError("Antenna counts must be positive")
    if P < 0:
        raise DomainError("Power must be nonnegative")
    if n_samples < 1:
        raise DomainError("At least one sample is required")
    bit_generator = get_bit_generator()
    rng = np.random.Generator(bit_generator(np.random.SeedSequence(seed)))
    size = min(r, t)
    identity = np.eye(size)
    samples = np.empty(n_samples)
    for start in range(0, n_samples, batch):
        b = min(batch, n_samples - start)
        real = rng.standard_normal((b, r, t))
        imag = rng.standard_normal((b, r, t))
        H = (real + 1j * imag) * math.sqrt(0.5)
        Hh = np.conj(np.swapaxes(H, -1, -2))
        gram = Hh @ H if t <= r else H @ Hh
        _, logdet = np.linalg.slogdet(identity + (P / t) * gram)
        samples[start : start + b] = logdet / math.log(2)
    std = float(samples.std(ddof=1)) if n_samples > 1 else 0.0
    return MimoCapacitySample(
        samples=samples, mean=float(samples.mean()), std=std
    )
