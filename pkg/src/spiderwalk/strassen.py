"""Zigzag extremals, Dirichlet energy, and the min-over-legs LIL statistic."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as K_
from .errors import InvalidArgumentError, InvalidPolylineError
from .stats import wilson_ci


@dataclass(frozen=True, eq=False)
class Polyline:
    """Continuous piecewise-linear function on [0, 1] with ``f(0) = 0``."""

    breakpoints: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.breakpoints, dtype=float)
        y = np.asarray(self.values, dtype=float)
        if x.ndim != 1 or x.shape != y.shape or x.size < 2:
            raise InvalidPolylineError("breakpoints and values must be 1-d arrays of equal length >= 2")
        if x[0] != 0.0 or x[-1] != 1.0:
            raise InvalidPolylineError("breakpoints must start at 0 and end at 1")
        if np.any(np.diff(x) <= 0):
            raise InvalidPolylineError("breakpoints must be strictly increasing (no zero-length segments)")
        if y[0] != 0.0:
            raise InvalidPolylineError("a Strassen polyline starts at f(0) = 0")
        object.__setattr__(self, "breakpoints", x)
        object.__setattr__(self, "values", y)

    @property
    def slopes(self) -> np.ndarray:
        return np.diff(self.values) / np.diff(self.breakpoints)

    def __call__(self, x):
        return np.interp(x, self.breakpoints, self.values)

    def scaled(self, factor: float) -> "Polyline":
        return Polyline(self.breakpoints, self.values * factor)


def zigzag(K: int) -> Polyline:
    """Polyline through ``(j/(2K-1), sin(j pi/2)/(2K-1))``, ``j = 0..2K-1``."""
    if K < 1:
        raise InvalidArgumentError(f"K must be >= 1, got {K}")
    m = 2 * K - 1
    j = np.arange(m + 1)
    r = np.array([0, 1, 0, -1])[j % 4]   # exact values of sin(j pi / 2)
    return Polyline(j / m, r / m)


def dirichlet_energy(p: Polyline) -> float:
    """``integral_0^1 f'(x)^2 dx`` for a polyline."""
    dx = np.diff(p.breakpoints)
    if np.any(dx <= 0):
        raise InvalidPolylineError("zero-length segment")
    dy = np.diff(p.values)
    return math.fsum(dy * dy / dx)


def polyline_projection(f, breakpoints) -> Polyline:
    """Interpolate ``f`` (a callable or Polyline) linearly between ``breakpoints``."""
    x = np.asarray(breakpoints, dtype=float)
    if x.size < 2 or x[0] != 0.0 or x[-1] != 1.0:
        raise InvalidPolylineError("breakpoints must include 0 and 1")
    return Polyline(x, np.asarray(f(x), dtype=float))


def local_maxima_of_abs(p: Polyline, tol: float = 1e-12) -> np.ndarray:
    """Breakpoint values of ``|f|`` that are strict local maxima (ends count one-sided)."""
    a = np.abs(p.values)
    left = np.r_[-np.inf, a[:-1]]
    right = np.r_[a[1:], -np.inf]
    mask = (a > left + tol) & (a > right + tol)
    return a[mask]


@dataclass(frozen=True)
class StrassenQuery:
    K: int
    a: float = 1.0
    alpha: float | None = None

    def __post_init__(self):
        if self.K < 1:
            raise InvalidArgumentError(f"K must be >= 1, got {self.K}")
        if not 0 < self.a <= 1:
            raise InvalidArgumentError(f"a must lie in (0, 1], got {self.a}")
        if self.alpha is None:
            object.__setattr__(self, "alpha", 1.0 / (2 * self.K - 1))
        if not self.alpha > 0:
            raise InvalidArgumentError(f"alpha must be positive, got {self.alpha}")

    @property
    def segments(self) -> int:
        return 2 * self.K - 1


@dataclass(frozen=True)
class SegmentSolution:
    lengths: np.ndarray
    energy: float
    numeric_lengths: np.ndarray
    numeric_energy: float
    iterations: int

    @property
    def agreement(self) -> float:
        return float(np.max(np.abs(self.lengths - self.numeric_lengths)))


def segment_energy(x, alpha: float) -> float:
    """``alpha^2 * sum 1/x_i``: energy of a zigzag of height alpha with run lengths x."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        return math.inf
    return alpha * alpha * math.fsum(1.0 / x)


def project_to_simplex(v: np.ndarray, total: float) -> np.ndarray:
    """Euclidean projection onto ``{x >= 0, sum x = total}``."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - total
    idx = np.arange(1, v.size + 1)
    rho = np.nonzero(u - css / idx > 0)[0][-1]
    theta = css[rho] / (rho + 1)
    return np.maximum(v - theta, 0.0)


def _projected_gradient(alpha: float, a: float, m: int, rng, tol=1e-14, max_iter=200_000):
    """Projected gradient on the scaled simplex.

    The step ``min(x)^3 / (2 alpha^2)`` is the inverse of the largest Hessian
    entry at the current point, so no function-value line search is needed
    (such searches stall near the optimum at about sqrt(machine eps)).
    """
    x = rng.dirichlet(np.ones(m)) * a
    x = 0.5 * x + 0.5 * a / m   # stay well inside the simplex
    for it in range(1, max_iter + 1):
        g = -alpha * alpha / (x * x)
        if np.ptp(g) <= tol * np.max(np.abs(g)):
            return x, it
        step = x.min() ** 3 / (2.0 * alpha * alpha)
        y = project_to_simplex(x - step * g, a)
        while np.any(y <= 0):
            step *= 0.5
            y = project_to_simplex(x - step * g, a)
        x = y
    return x, max_iter


def minimize_segments(q: StrassenQuery, seed: int = 0) -> SegmentSolution:
    """Equal lengths ``a/(2K-1)`` minimise ``alpha^2 sum 1/x_i`` under ``sum x_i = a``.

    The minimum is ``alpha^2 (2K-1)^2 / a``; a projected-gradient run from a
    random interior point provides an independent check.
    """
    m = q.segments
    closed = np.full(m, q.a / m)
    energy = q.alpha ** 2 * m * m / q.a
    num, iters = _projected_gradient(q.alpha, q.a, m, np.random.default_rng(seed))
    return SegmentSolution(closed, energy, num, segment_energy(num, q.alpha), iters)


# -- rescaled walk paths ------------------------------------------------------

def lil_scale(n) -> np.ndarray | float:
    """``sqrt(2 n log log n)``."""
    n = np.asarray(n, dtype=float)
    out = np.sqrt(2.0 * n * np.log(np.log(n)))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True, eq=False)
class RescaledPath:
    n: int
    values: np.ndarray           # S(k)/sqrt(2n log log n) at x = k/n

    def __call__(self, x):
        return np.interp(x, np.arange(self.n + 1) / self.n, self.values)

    def distance_to(self, p: Polyline) -> float:
        """Sup-norm distance; both sides are linear between the merged breakpoints."""
        grid = np.union1d(np.arange(self.n + 1) / self.n, p.breakpoints)
        return float(np.max(np.abs(self(grid) - p(grid))))


def rescaled_path(path, n: int | None = None) -> RescaledPath:
    """Rescale a signed path ``S_0..S_n`` to ``x -> S(xn)/sqrt(2n log log n)``."""
    s = np.asarray(path, dtype=float)
    n = s.size - 1 if n is None else int(n)
    if n < 16:
        raise InvalidArgumentError(f"n must be >= 16, got {n}")
    if s.size < n + 1:
        raise InvalidArgumentError("path shorter than n + 1 points")
    return RescaledPath(n, s[: n + 1] / lil_scale(n))


def signed_walk(n: int, source) -> np.ndarray:
    steps = source.fair_bits(n).astype(np.int64) * 2 - 1
    return np.concatenate([[0], np.cumsum(steps)])


def best_distance_over_seeds(n: int, target: Polyline, seeds, source_factory) -> np.ndarray:
    """Running minimum of the distance to ``target`` over successive seeds."""
    d = [rescaled_path(signed_walk(n, source_factory(s))).distance_to(target) for s in seeds]
    return np.minimum.accumulate(np.array(d))


# -- min-over-legs LIL statistic -----------------------------------------------

def dyadic_checkpoints(n_max: int, start: int = 16) -> np.ndarray:
    """Powers of two from ``start`` up to ``n_max``, plus ``n_max`` itself."""
    if start < 16:
        raise InvalidArgumentError("checkpoints must be >= 16")
    pts = []
    p = start
    while p < n_max:
        pts.append(p)
        p *= 2
    pts.append(int(n_max))
    return np.array(pts, dtype=np.int64)


@dataclass(frozen=True, eq=False)
class Theorem16Trace:
    K: int
    checkpoints: np.ndarray
    min_leg_max: np.ndarray
    statistic: np.ndarray
    running_max: np.ndarray

    @property
    def target(self) -> float:
        return 1.0 / (2 * self.K - 1)

    def rows(self):
        for n, s, r in zip(self.checkpoints, self.statistic, self.running_max):
            yield int(n), float(s), float(r), self.target


def theorem16_statistic(checkpoints, K: int, source, chunk: int = 1 << 22) -> Theorem16Trace:
    """Follow one spider walk on K legs and report ``min_j M_K(n,j)/sqrt(2n log log n)``.

    The walk is the reflected walk with each excursion sent to a uniform leg,
    legs drawn in excursion order.  The excursion running at a checkpoint
    already counts towards its leg's maximum.
    """
    if K < 1:
        raise InvalidArgumentError(f"K must be >= 1, got {K}")
    cps = np.asarray([int(c) for c in checkpoints], dtype=np.int64)
    if cps.size == 0 or cps[0] < 16 or np.any(np.diff(cps) <= 0):
        raise InvalidArgumentError("checkpoints must be increasing and >= 16")
    chunk = max(64, chunk - chunk % 64)
    state = K_.new_reflected_state()
    leg_max = np.zeros(K, np.int64)
    pending = None       # leg already drawn for the running excursion
    buf = [np.empty(chunk // 2 + 2, np.int64) for _ in range(4)]
    mins = np.empty(cps.size, np.int64)
    done = 0
    for i, cp in enumerate(cps):
        while done < cp:
            m = min(chunk, int(cp) - done)
            words = source.fair_bit_block(m)
            c = K_.excursion_chunk(words, m, 1, state, *buf)
            if c:
                legs = np.empty(c, np.int64)
                first = 0
                if pending is not None:
                    legs[0] = pending
                    pending = None
                    first = 1
                legs[first:] = source.choice_index(K, c - first)
                np.maximum.at(leg_max, legs, buf[2][:c])
            done += m
        now = leg_max.copy()
        if state[K_.CUR_MAX] > 0:
            if pending is None:
                pending = int(source.choice_index(K, 1)[0])
            now[pending] = max(now[pending], state[K_.CUR_MAX])
        mins[i] = now.min()
    stat = mins / lil_scale(cps)
    return Theorem16Trace(K, cps, mins, stat, np.maximum.accumulate(stat))


def distinct_legs_probability(K: int) -> float:
    return math.factorial(K) / K ** K


@dataclass(frozen=True)
class DistinctLegsResult:
    K: int
    hits: int
    trials: int
    ci_low: float
    ci_high: float
    exact: float

    @property
    def frequency(self) -> float:
        return self.hits / self.trials

    @property
    def covers_exact(self) -> bool:
        return self.ci_low <= self.exact <= self.ci_high


def distinct_legs_check(K: int, trials: int, source, level: float = 0.99) -> DistinctLegsResult:
    """Throw K tall excursions on K legs; how often do they land on distinct legs?"""
    legs = source.choice_index(K, K * trials).reshape(trials, K)
    s = np.sort(legs, axis=1)
    hits = int(np.count_nonzero(np.all(np.diff(s, axis=1) > 0, axis=1))) if K > 1 else trials
    lo, hi = wilson_ci(hits, trials, level)
    return DistinctLegsResult(K, hits, trials, lo, hi, distinct_legs_probability(K))
