"""
Extreme-value constants, threshold estimators and tail laws for Gaussian
capacities.

All logarithms are natural logarithms.
"""
import math
from dataclasses import dataclass

import numpy as np
from scipy import special
from scipy.stats import genextreme, genpareto

from django_oppsched.exceptions import DomainError, NoLimitError

EULER_GAMMA = float(np.euler_gamma)

LOG_4PI = math.log(4 * math.pi)


@dataclass(frozen=True)
class GevParams:
    xi: float
    location: float
    scale: float

    def cdf(self, x):
        # scipy's genextreme uses the opposite sign convention for the shape
        return genextreme.cdf(x, -self.xi, loc=self.location, scale=self.scale)

    def sf(self, x):
        return genextreme.sf(x, -self.xi, loc=self.location, scale=self.scale)


@dataclass(frozen=True)
class NormConstants:
    """Scale ``a`` and location ``b`` normalising the maximum of ``n``"""

    a: float
    b: float
    n: float

    def gumbel(self):
        return GevParams(xi=0.0, location=self.b, scale=self.a)

    def normalize(self, maxima):
        return (np.asarray(maxima, dtype=float) - self.b) / self.a


@dataclass(frozen=True)
class TailModel:
    threshold: float
    rate: float
    sigma_v: float
    xi: float = 0.0

    @classmethod
    def for_threshold(cls, u, n, mu=0.0, sigma=1.0, xi=0.0):
        """
        Excess law above ``u`` for a population normalised with ``n``.

        ``v`` is the normalised threshold and the GPD scale is
        ``sigma * a_n * (1 + xi * v)``.
        """
        constants = norm_constants(n, mu, sigma)
        v = (u - constants.b) / constants.a
        sigma_v = constants.a * (1.0 + xi * v)
        if sigma_v <= 0:
            raise DomainError(
                f"Threshold {u} lies beyond the upper endpoint for xi={xi}"
            )
        return cls(
            threshold=u, rate=1.0 / constants.a, sigma_v=sigma_v, xi=xi
        )

    def survival(self, x):
        return gpd_survival(x, self.sigma_v, self.xi)

    def mean_excess(self):
        if self.xi >= 1:
            return math.inf
        return self.sigma_v / (1.0 - self.xi)


def _check_sample_count(n):
    if not n >= 2 or not math.isfinite(n):
        raise DomainError(
            f"Normalising constants need n >= 2, got {n}: log(log(n)) "
            "is undefined below that"
        )


def norm_constants(n, mu=0.0, sigma=1.0):
    """
    Normalising constants of the maximum of ``n`` Gaussian samples.

    ``a = sigma * (2 log n)^(-1/2)`` and
    ``b = sigma * [(2 log n)^(1/2)
    - (2 log n)^(-1/2) (log log n + log 4 pi) / 2] + mu``.

    ``n`` may be fractional; block counts of the form ``1/p`` are.
    """
    _check_sample_count(n)
    if not sigma > 0:
        raise DomainError(f"sigma must be positive, got {sigma}")
    two_log_n = 2.0 * math.log(n)
    root = math.sqrt(two_log_n)
    a_std = 1.0 / root
    b_std = root - 0.5 * a_std * (math.log(math.log(n)) + LOG_4PI)
    return NormConstants(a=sigma * a_std, b=sigma * b_std + mu, n=n)


def expected_max(n, mu=0.0, sigma=1.0):
    """Expected maximal capacity of ``n`` users under the Gumbel law"""
    standard = norm_constants(n)
    return sigma * (standard.b + standard.a * EULER_GAMMA) + mu


def _check_fraction(k, K):
    if not 0 < k < K:
        raise DomainError(f"Need 0 < k < K, got k={k}, K={K}")


def threshold_gaussian(K, k, mu=0.0, sigma=1.0):
    """
    Threshold exceeded on average by ``k`` of ``K`` users.

    Solves ``1 - Phi((u - mu) / sigma) = k / K`` through the inverse
    complementary error function, polished with two Newton steps against
    ``erfc``.
    """
    _check_fraction(k, K)
    y = 2.0 * k / K
    x = float(special.erfcinv(y))
    if not math.isfinite(x):
        raise DomainError(
            f"Tail probability k/K={k / K!r} is too small: erfcinv({y!r}) "
            "overflows"
        )
    for _ in range(2):
        scale = math.exp(x * x) if x * x < 700 else math.inf
        if not math.isfinite(scale):
            break
        x += (float(special.erfc(x)) - y) * (math.sqrt(math.pi) / 2) * scale
    return mu + math.sqrt(2.0) * sigma * x


def threshold_gaussian_series(K, k, mu=0.0, sigma=1.0):
    """Truncated asymptotic expansion of :func:`threshold_gaussian`"""
    _check_fraction(k, K)
    inner = 2.0 * math.log(k / K) + math.log(2 * math.pi)
    if inner >= 0:
        raise DomainError(
            f"Series expansion needs k/K < (2 pi)^(-1/2), got {k / K!r}"
        )
    radicand = 2.0 * math.log(K / k) - math.log(-2 * math.pi * inner)
    if radicand < 0:
        raise DomainError(f"Series expansion undefined for k/K={k / K!r}")
    return mu + sigma * math.sqrt(radicand)


def gumbel_return_level(p, mu=0.0, sigma=1.0, form="constants"):
    """
    The ``1 - p`` Gumbel return level, with constants for ``n = 1/p``.

    ``form="constants"`` evaluates ``b_n - a_n log(-log(1 - p))`` with
    the full normalising constants; ``form="display"`` drops the
    log-log correction of ``b_n``, leaving only first-order terms.
    """
    if not 0 < p < 1:
        raise DomainError(f"Exceedance probability must be in (0, 1), got {p}")
    n = 1.0 / p
    _check_sample_count(n)
    log_term = math.log(-math.log1p(-p))
    if form == "constants":
        standard = norm_constants(n)
        level = standard.b - standard.a * log_term
    elif form == "display":
        two_log_n = 2.0 * math.log(n)
        level = math.sqrt(two_log_n) - log_term / math.sqrt(two_log_n)
    else:
        raise DomainError(f"Unknown return level form '{form}'")
    return mu + sigma * level


def gumbel_blocks(K):
    """Block size and block count of the block-maxima construction"""
    if K < 1:
        raise DomainError(f"K must be positive, got {K}")
    size = math.isqrt(int(K))
    return size, int(K) // size


def threshold_gumbel(K, k, mu=0.0, sigma=1.0, form="constants"):
    """
    Block-maxima threshold: ``k`` of the block maxima exceed it on average.

    The ``K`` users are split into blocks of ``floor(sqrt(K))`` users,
    giving ``K // floor(sqrt(K))`` blocks and ``p = k / blocks``.
    """
    if not k > 0:
        raise DomainError(f"k must be positive, got {k}")
    _, blocks = gumbel_blocks(K)
    p = k / blocks
    if p >= 1:
        raise DomainError(
            f"k={k} must stay below the block count {blocks} (p={p})"
        )
    return gumbel_return_level(p, mu, sigma, form=form)


def tail_excess_survival(x, a):
    """Survival ``exp(-x / a)`` of the excess above a high threshold"""
    if not a > 0:
        raise DomainError(f"Scale must be positive, got {a}")
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise DomainError("Excess must be nonnegative")
    result = np.exp(-x / a)
    return float(result) if result.ndim == 0 else result


def gpd_survival(x, sigma_v, xi):
    """Generalised Pareto survival, clamped at the upper endpoint"""
    if not sigma_v > 0:
        raise DomainError(f"GPD scale must be positive, got {sigma_v}")
    result = genpareto.sf(x, xi, scale=sigma_v)
    return float(result) if np.ndim(result) == 0 else result


def _reciprocal_hazard(dist, x):
    return dist.sf(x) / dist.pdf(x)


def reciprocal_hazard_shape(
    dist, start=4.0, stop=8.0, points=32, rel_step=1e-4, tol=0.05
):
    """
    Estimate the shape ``xi`` as the limit of ``d/dx [(1 - F) / f]``.

    ``dist`` is any object with ``sf``, ``pdf`` and ``support`` (a frozen
    scipy distribution). With an infinite upper endpoint the derivative
    is sampled on a geometric grid from ``start`` to ``stop``; with a
    finite endpoint the distances to it shrink geometrically from
    ``endpoint - start`` by six decades. Derivatives are central
    differences with a step of ``rel_step`` times the grid scale.

    Raises :class:`NoLimitError` when the last quarter of the sequence
    spreads more than ``tol``.
    """
    upper = float(dist.support()[1])
    if math.isfinite(upper):
        if not start < upper:
            raise DomainError("Grid start must lie below the upper endpoint")
        distance = np.geomspace(upper - start, (upper - start) * 1e-6, points)
        grid = upper - distance
        steps = rel_step * distance
    else:
        grid = np.geomspace(start, stop, points)
        steps = rel_step * grid

    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        derivatives = (
            _reciprocal_hazard(dist, grid + steps)
            - _reciprocal_hazard(dist, grid - steps)
        ) / (2 * steps)

    tail = derivatives[-max(points // 4, 2) :]
    if not np.all(np.isfinite(tail)):
        raise NoLimitError("Reciprocal hazard derivative is not finite")
    if tail.max() - tail.min() > tol:
        raise NoLimitError(
            "Reciprocal hazard derivative does not settle: spread "
            f"{tail.max() - tail.min():.3g} over the last {len(tail)} points"
        )
    return float(derivatives[-1])
