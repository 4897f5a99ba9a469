"""Monte Carlo drivers for the all-legs climbing probabilities.

Three engines estimate ``P(M(n, L))`` or ``P(A(n, L, k))``:

``naive``
    compiled spider walk, indicator of the event;
``excursion``
    compiled reflected walk, each excursion thrown on a uniform leg, indicator;
``rao-blackwell``
    compiled reflected walk, then the exact probability of the event given
    the per-excursion visit counts at level L (legs integrated out).

Every replication ``r`` draws from ``source_for(seed, r)``, and replications
are merged in index order, so results do not depend on the worker count.
"""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from . import _kernels as K
from .config import DIVERGING, SCHEDULES, ExperimentConfig, n_steps
from .errors import InvalidArgumentError, ResourceBudgetError
from .excursions import scan_path
from .rng import source_for
from .stats import mean_ci, normal_tail, normal_tail_quadrature, wilson_ci
from .urns import WeightedCoverage, coverage_table

__all__ = [
    "n_steps", "p_of_c", "check_regime", "level_presets", "resolve_level", "EstimateWithCI", "estimate_limit_probability",
    "sweep_f_schedule", "verify_lemma32", "chung_statistic", "exact_m1_probability",
]

STEP_BUDGET = 10**11
CHUNK_STEPS = 1 << 22


def p_of_c(c: float) -> float:
    """``P(|Z| > 1/c)``."""
    if not c > 0:
        raise InvalidArgumentError(f"c must be positive, got {c}")
    return normal_tail(1.0 / c)


def p_of_c_quadrature(c: float) -> float:
    if not c > 0:
        raise InvalidArgumentError(f"c must be positive, got {c}")
    return normal_tail_quadrature(1.0 / c)


def lemma32_threshold(n: int) -> float:
    """Deviation scale ``4 n^(1/4) (log n)^(3/4)``."""
    return 4.0 * n ** 0.25 * math.log(n) ** 0.75


def level_presets(N: int, alphas=(0.5,)) -> list[int]:
    """Heights ``1`` and ``max(1, floor(N^a / log N))`` for each ``a`` in ``alphas``.

    These are convenient growth paths for L with N, not the only admissible
    ones; every value stays at or below ``N / log N`` when ``a <= 1``.
    """
    if N < 2:
        raise InvalidArgumentError(f"N must be >= 2, got {N}")
    out = {1}
    for a in alphas:
        if not 0 < a <= 1:
            raise InvalidArgumentError(f"alpha must lie in (0, 1], got {a}")
        out.add(max(1, math.floor(N ** a / math.log(N))))
    return sorted(out)


def resolve_level(N: int, value) -> int:
    """Turn a level given as an integer or as ``"N^a"`` into an integer height."""
    if isinstance(value, str):
        base, sep, power = value.replace(" ", "").partition("^")
        try:
            a = float(power)
        except ValueError:
            a = None
        if base != "N" or not sep or a is None:
            raise InvalidArgumentError(f"level must be an integer or 'N^a', got {value!r}")
        return level_presets(N, (a,))[-1]
    L = int(value)
    if L != value or L < 1:
        raise InvalidArgumentError(f"level must be a positive integer, got {value!r}")
    return L


@dataclass(frozen=True)
class RegimeCheck:
    in_regime: bool
    ratio_bound: float
    margin: float
    n: int
    epsilon: float

    def __bool__(self):
        return self.in_regime


def regime_centre(N: int) -> float:
    """Expected number of tall excursions needed to cover N legs, ``N log N``."""
    return N * math.log(N)


def check_regime(N: int, L: int, epsilon: float = 0.1, n: int | None = None) -> RegimeCheck:
    """Whether ``L <= N / log N``, plus the margin ``eps*mu - 4 n^(1/4)(log n)^(3/4)``.

    ``n`` defaults to the c = 1 step count for (N, L).
    """
    if N < 2:
        raise InvalidArgumentError(f"N must be >= 2, got {N}")
    if L < 1:
        raise InvalidArgumentError(f"L must be >= 1, got {L}")
    n = n_steps(N, L, 1.0) if n is None else int(n)
    bound = N / math.log(N)
    margin = epsilon * regime_centre(N) - lemma32_threshold(max(n, 2))
    return RegimeCheck(L <= bound, bound, margin, n, epsilon)


@dataclass(frozen=True)
class EstimateWithCI:
    point: float
    ci_low: float
    ci_high: float
    replications: int
    target: float
    engine: str
    n: int = 0
    regime_counts: dict = field(default_factory=dict)
    values: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if not self.ci_low - 1e-12 <= self.point <= self.ci_high + 1e-12:
            raise ValueError("point estimate outside its confidence interval")


# -- one replication per engine --------------------------------------------

def naive_leg_profile(N: int, n: int, level: int, source) -> tuple[np.ndarray, np.ndarray]:
    """Per-leg maxima and visits to ``level`` of an n-step spider walk (compiled kernel).

    Draws bits and legs in the same order as :func:`spider.walk_spider`, so
    both see the same walk on the same source.
    """
    state = K.new_spider_state()
    leg_max = np.zeros(N, np.int64)
    visits = np.zeros(N, np.int64)
    words = source.fair_bit_block(n) if n else np.zeros(1, np.uint64)
    batch = 256
    while state[K.SP_T] < n:
        legs = source.choice_index(N, batch)
        state[K.SP_LEGPOS] = 0
        K.spider_chunk(words, legs, n, level, state, leg_max, visits)
        batch = min(batch * 2, 1 << 20)
    return leg_max, visits


def _naive_replication(config: ExperimentConfig, source) -> tuple[float, int]:
    _, visits = naive_leg_profile(config.N, config.steps, config.L, source)
    return float(visits.min() >= config.k), -1


def _excursion_replication(config: ExperimentConfig, source) -> tuple[float, int]:
    scan = scan_path(config.steps, source, level=config.L)
    vis = scan.all_visits()
    legs = source.choice_index(config.N, vis.size)
    per_leg = np.bincount(legs, weights=vis, minlength=config.N)
    return float(per_leg.min() >= config.k), scan.tall_reached(config.L)


def _rb_counts(config: ExperimentConfig, source) -> tuple[np.ndarray, int]:
    scan = scan_path(config.steps, source, level=config.L)
    return scan.weight_counts(config.k), scan.tall_reached(config.L)


def _run_block(config: ExperimentConfig, first: int, last: int):
    """Replications ``first..last-1``; returns per-replication values and tall counts."""
    vals = np.empty(last - first)
    tall = np.empty(last - first, np.int64)
    if config.engine == "rao-blackwell":
        counts = np.empty((last - first, config.k + 1), np.int64)
        for i, r in enumerate(range(first, last)):
            counts[i], tall[i] = _rb_counts(config, source_for(config.seed, r))
        vals = WeightedCoverage(config.N, config.k).probability(counts)
    else:
        one = _naive_replication if config.engine == "naive" else _excursion_replication
        for i, r in enumerate(range(first, last)):
            vals[i], tall[i] = one(config, source_for(config.seed, r))
    return vals, tall


def _blocks(total: int, workers: int):
    size = max(1, math.ceil(total / max(1, workers * 4)))
    return [(a, min(total, a + size)) for a in range(0, total, size)]


def run_replications(config: ExperimentConfig, workers: int = 1):
    """Per-replication values and tall counts, merged in replication order."""
    blocks = _blocks(config.replications, workers)
    if workers <= 1 or len(blocks) == 1:
        parts = [_run_block(config, a, b) for a, b in blocks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_block, config, a, b) for a, b in blocks]
            parts = [f.result() for f in futures]
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def _check_budget(config: ExperimentConfig, budget: int = STEP_BUDGET):
    total = config.total_steps
    if total > budget:
        raise ResourceBudgetError(
            f"configuration needs {total:.3e} walk steps, above the budget of {budget:.0e}",
            required=total, budget=budget)


def _regime_counts(config: ExperimentConfig, tall: np.ndarray) -> dict:
    if config.N < 2 or tall.size == 0 or tall[0] < 0:
        return {}
    mu = regime_centre(config.N)
    eps = config.epsilon
    low, high = (1 - 2 * eps) * mu, (1 + 2 * eps) * mu
    return {"B-": int(np.count_nonzero(tall <= low)),
            "B": int(np.count_nonzero((tall > low) & (tall < high))),
            "B+": int(np.count_nonzero(tall >= high))}


def estimate_limit_probability(config: ExperimentConfig, workers: int = 1,
                               level: float = 0.95, budget: int = STEP_BUDGET) -> EstimateWithCI:
    """Estimate ``P(A(n, L, k))`` (``P(M(n, L))`` when k = 1) at ``n = config.steps``.

    The target is ``p(scale)`` with ``scale`` the constant c or f(N).
    """
    _check_budget(config, budget)
    vals, tall = run_replications(config, workers)
    if config.engine == "rao-blackwell":
        point, lo, hi = mean_ci(vals, level)
    else:
        s = int(vals.sum())
        point = s / vals.size
        lo, hi = wilson_ci(s, vals.size, level)
    return EstimateWithCI(point, lo, hi, vals.size, p_of_c(config.scale), config.engine,
                          config.steps, _regime_counts(config, tall), vals)


def sweep_f_schedule(config: ExperimentConfig, N_grid, workers: int = 1,
                     level: float = 0.95) -> list[tuple[int, EstimateWithCI]]:
    """Estimates at ``n = (f(N) L N log N)^2`` over a grid of N."""
    if config.f_schedule is None:
        raise InvalidArgumentError("sweep_f_schedule needs a config with f_schedule set")
    grid = sorted(int(N) for N in N_grid)
    f = SCHEDULES[config.f_schedule]
    if config.f_schedule not in DIVERGING:
        growth = [f(N) * config.L * N * math.log(N) for N in grid]
        if any(b <= a for a, b in zip(growth, growth[1:])):
            warnings.warn(f"f(N) L N log N does not increase along the grid for {config.f_schedule}",
                          RuntimeWarning, stacklevel=2)
    out = []
    for N in grid:
        est = estimate_limit_probability(config.with_(N=N), workers, level)
        target = 1.0 if config.f_schedule in DIVERGING else 0.0
        out.append((N, EstimateWithCI(est.point, est.ci_low, est.ci_high, est.replications, target,
                                      est.engine, est.n, est.regime_counts, est.values)))
    return out


# -- exact finite-N oracle ----------------------------------------------------

def exact_m1_probability(N: int, n: int) -> float:
    """Exact ``P(M(n, 1))`` from the law of the number of returns to 0.

    With ``m = floor((n-1)/2)``, the returns in ``[1, 2m]`` number r with
    probability ``C(2m-r, m) / 2^(2m-r)``, and the walk has thrown ``r + 1``
    excursions onto uniform legs by time n.
    """
    if n < 1:
        return 0.0
    m = (n - 1) // 2
    r = np.arange(0, m + 1)
    logp = gammaln(2 * m - r + 1) - gammaln(m + 1) - gammaln(m - r + 1) - (2 * m - r) * math.log(2)
    probs = np.exp(logp)
    cover = coverage_table(N, m + 1)[r + 1]
    return float(np.dot(probs, cover))


# -- lemma checks and trend statistics -----------------------------------------

@dataclass(frozen=True)
class Lemma32Result:
    n: int
    L: int
    replications: int
    violations: int
    threshold: float
    max_deviation: float

    @property
    def frequency(self) -> float:
        return self.violations / self.replications

    @property
    def bound(self) -> float:
        return 2.0 / self.n

    @property
    def slack(self) -> float:
        p = min(self.bound, 1.0)
        return 3.0 * math.sqrt(p * (1 - p) / self.replications)

    @property
    def within(self) -> bool:
        return self.frequency <= self.bound + self.slack


def lemma32_deviations(n: int, L: int, replications: int, seed: int = 0) -> np.ndarray:
    """``|zeta(L, n) - xi0(n) / L|`` for each replication."""
    out = np.empty(replications)
    for r in range(replications):
        src = source_for(seed, r)
        scan = scan_path(n, src, level=L)
        out[r] = abs(scan.zeta(L, src) - scan.zero_count / L)
    return out


def verify_lemma32(n: int, L: int, replications: int, seed: int = 0) -> Lemma32Result:
    if n < 16:
        raise InvalidArgumentError(f"n must be >= 16, got {n}")
    if L < 1:
        raise InvalidArgumentError(f"L must be >= 1, got {L}")
    dev = lemma32_deviations(n, L, replications, seed)
    thr = lemma32_threshold(n)
    return Lemma32Result(n, L, replications, int(np.count_nonzero(dev >= thr)), thr, float(dev.max()))


def max_at_checkpoints(checkpoints, source, chunk: int = CHUNK_STEPS) -> np.ndarray:
    """``max_{k<=n} |S_k|`` of one walk at each of the increasing ``checkpoints``."""
    cps = [int(c) for c in checkpoints]
    if any(b <= a for a, b in zip(cps, cps[1:])) or (cps and cps[0] < 0):
        raise InvalidArgumentError("checkpoints must be non-negative and strictly increasing")
    state = K.new_reflected_state()
    out = np.empty(len(cps), np.int64)
    done = 0
    buf = np.empty(chunk // 2 + 2, np.int64)
    for i, cp in enumerate(cps):
        while done < cp:
            m = min(chunk - chunk % 64, cp - done)
            words = source.fair_bit_block(m)
            K.excursion_chunk(words, m, 1, state, buf, buf, buf, buf)
            done += m
        out[i] = state[K.PATH_MAX]
    return out


@dataclass(frozen=True)
class ChungSample:
    checkpoints: np.ndarray
    values: np.ndarray          # shape (replications, len(checkpoints))
    constant: float = math.pi / math.sqrt(8.0)

    @property
    def running_min(self) -> np.ndarray:
        return np.minimum.accumulate(self.values, axis=1)


def chung_statistic(checkpoints, replications: int, seed: int = 0) -> ChungSample:
    """``(log log n / n)^(1/2) max_{k<=n}|S_k|`` per path at each checkpoint."""
    cps = np.asarray(sorted(int(c) for c in checkpoints))
    if cps.size == 0 or cps[0] < 16:
        raise InvalidArgumentError("checkpoints must be >= 16")
    norm = np.sqrt(np.log(np.log(cps)) / cps)
    vals = np.empty((replications, cps.size))
    for r in range(replications):
        vals[r] = max_at_checkpoints(cps, source_for(seed, r)) * norm
    return ChungSample(cps, vals)
