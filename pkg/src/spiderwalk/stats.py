"""Numerical and statistical primitives used by the experiment drivers."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special, stats

from .errors import InvalidArgumentError


def normal_tail(z: float) -> float:
    """Two-sided standard normal tail ``P(|Z| > z)``.

    Evaluated as ``erfc(z / sqrt(2))`` which the C library computes with
    rational approximations accurate to a few ulps.
    """
    if z < 0 or math.isnan(z):
        raise InvalidArgumentError(f"normal_tail needs z >= 0, got {z}")
    return math.erfc(z / math.sqrt(2.0))


def normal_tail_quadrature(z: float) -> float:
    """``(2/pi)^(1/2) * integral_z^inf exp(-u^2/2) du`` by adaptive quadrature.

    Independent cross-check for :func:`normal_tail`.
    """
    if z < 0:
        raise InvalidArgumentError(f"z must be >= 0, got {z}")
    # Integrate over a finite window; the tail beyond z+40 is below 1e-300.
    val, _ = integrate.quad(lambda u: math.exp(-0.5 * u * u), z, z + 40.0,
                            epsabs=0.0, epsrel=1e-13, limit=200)
    return math.sqrt(2.0 / math.pi) * val


def half_normal_cdf(x):
    x = np.asarray(x, dtype=float)
    return np.where(x > 0, special.erf(np.maximum(x, 0.0) / math.sqrt(2.0)), 0.0)


def _z_for_level(level: float) -> float:
    return float(stats.norm.ppf(0.5 + level / 2.0))


def wilson_ci(successes: int, trials: int, level: float = 0.95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials < 1 or not 0 <= successes <= trials:
        raise InvalidArgumentError(f"need 0 <= successes <= trials and trials >= 1, got {successes}/{trials}")
    if not 0 < level < 1:
        raise InvalidArgumentError(f"level must lie in (0, 1), got {level}")
    z = _z_for_level(level)
    p = successes / trials
    denom = 1.0 + z * z / trials
    centre = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    low = 0.0 if successes == 0 else max(0.0, centre - half)
    high = 1.0 if successes == trials else min(1.0, centre + half)
    return low, high


def mean_ci(values, level: float = 0.95, bounds=(0.0, 1.0)) -> tuple[float, float, float]:
    """Point estimate and normal-theory CI for the mean of ``values``, clipped to ``bounds``."""
    v = np.asarray(values, dtype=float)
    if v.size < 1:
        raise InvalidArgumentError("need at least one value")
    point = float(v.mean())
    if v.size == 1:
        return point, bounds[0], bounds[1]
    half = _z_for_level(level) * float(v.std(ddof=1)) / math.sqrt(v.size)
    return point, max(bounds[0], point - half), min(bounds[1], point + half)


@dataclass(frozen=True)
class KSResult:
    statistic: float
    critical_value: float
    level: float
    passed: bool


def ks_against_half_normal(sample, level: float = 0.99) -> KSResult:
    """One-sample Kolmogorov-Smirnov distance to the law of ``|Z|``.

    The test passes when the distance is below the asymptotic Kolmogorov
    critical value at ``level``.
    """
    x = np.asarray(sample, dtype=float)
    if x.size < 50:
        raise InvalidArgumentError(f"KS test needs at least 50 observations, got {x.size}")
    d = float(stats.kstest(x, stats.halfnorm.cdf).statistic)
    crit = float(stats.kstwobign.ppf(level)) / math.sqrt(x.size)
    return KSResult(d, crit, level, d < crit)


@dataclass(frozen=True)
class BernoulliSumSpec:
    """Sum of ``j`` Bernoulli summands checked against the horizon-``k`` bound."""

    k: int
    x: float
    j: int | None = None

    def __post_init__(self):
        j = self.k if self.j is None else self.j
        if not 0 <= j <= self.k:
            raise InvalidArgumentError(f"need 0 <= j <= k, got j={j}, k={self.k}")
        if self.x <= 0:
            raise InvalidArgumentError(f"x must be positive, got {self.x}")
        object.__setattr__(self, "j", j)

    @property
    def bound(self) -> float:
        return 2.0 * math.exp(-2.0 * self.k * self.x * self.x)


@dataclass(frozen=True)
class HoeffdingResult:
    empirical: float
    bound: float
    sigma: float
    replications: int

    @property
    def within_bound(self) -> bool:
        return self.empirical <= self.bound + 3.0 * self.sigma


def hoeffding_check(spec: BernoulliSumSpec, p: float, replications: int, source) -> HoeffdingResult:
    """Empirical ``P(|S_j - j p| >= k x)`` against ``2 exp(-2 k x^2)``.

    ``S_j`` is a sum of ``j`` i.i.d. Bernoulli(p) variables; when ``j < k``
    the remaining ``k - j`` summands are identically zero.
    """
    if not 0 <= p <= 1:
        raise InvalidArgumentError(f"p must lie in [0, 1], got {p}")
    sums = source.generator.binomial(spec.j, p, size=int(replications))
    hits = np.abs(sums - spec.j * p) >= spec.k * spec.x
    emp = float(hits.mean())
    b = min(spec.bound, 1.0)
    sigma = math.sqrt(b * (1 - b) / replications)
    return HoeffdingResult(emp, spec.bound, sigma, int(replications))
