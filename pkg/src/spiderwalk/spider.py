"""The walk kernel on a spider with N legs and path-level bookkeeping.

Sites are ``SpiderSite(leg, radius)``.  Legs are numbered ``1..N``; the body
is the single site with radius 0 and is always stored with the canonical leg
value 0, so ``SpiderSite(0, 0)`` is the one key for it in every map.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping, NamedTuple

import numpy as np

from .config import ExperimentConfig
from .errors import InvalidArgumentError, InvalidConfigurationError


class SpiderSite(NamedTuple):
    leg: int
    radius: int

    @property
    def is_body(self) -> bool:
        return self.radius == 0


BODY = SpiderSite(0, 0)


def site(leg: int, radius: int) -> SpiderSite:
    """Canonical site constructor (collapses every radius-0 site onto BODY)."""
    if radius < 0:
        raise InvalidArgumentError(f"radius must be >= 0, got {radius}")
    return BODY if radius == 0 else SpiderSite(int(leg), int(radius))


def step_spider(state: SpiderSite, leg_count: int, source) -> SpiderSite:
    """One transition of the walk.

    From the body the walker moves to radius 1 on a uniformly chosen leg
    (one index draw).  Elsewhere it moves one unit up or down its current
    leg with probability 1/2 each (one fair bit).
    """
    if leg_count < 1:
        raise InvalidConfigurationError(f"leg_count must be >= 1, got {leg_count}")
    if state.radius < 0:
        raise InvalidArgumentError(f"radius must be >= 0, got {state.radius}")
    if state.radius == 0:
        leg = int(source.choice_index(leg_count, 1)[0]) + 1
        return SpiderSite(leg, 1)
    if source.fair_bits(1)[0]:
        return SpiderSite(state.leg, state.radius + 1)
    return site(state.leg, state.radius - 1)


@dataclass(frozen=True, eq=False)
class WalkSummary:
    """Local-time ledger and per-leg maxima of one realised n-step walk.

    ``legs_path`` and ``radii`` hold the visited site at every time
    ``0..n`` (leg 0 at the body).  Counting uses the closed range ``k <= n``
    unless a method is given explicit bounds.
    """

    n: int
    leg_count: int
    legs_path: np.ndarray = field(repr=False)
    radii: np.ndarray = field(repr=False)
    local_times: Mapping[SpiderSite, int] = field(repr=False)
    leg_maxima: tuple
    zero_count: int

    @classmethod
    def from_path(cls, legs_path, radii, leg_count: int) -> "WalkSummary":
        legs_path = np.asarray(legs_path, dtype=np.int64)
        radii = np.asarray(radii, dtype=np.int64)
        if legs_path.shape != radii.shape or radii.size == 0:
            raise InvalidArgumentError("path arrays must be non-empty and of equal length")
        legs_path = np.where(radii == 0, 0, legs_path)
        top = int(radii.max()) + 1
        keys, counts = np.unique(legs_path * top + radii, return_counts=True)
        lt = {site(int(k // top), int(k % top)): int(c) for k, c in zip(keys, counts)}
        maxima = np.zeros(leg_count, dtype=np.int64)
        off = radii > 0
        if off.any():
            np.maximum.at(maxima, legs_path[off] - 1, radii[off])
        legs_path.setflags(write=False)
        radii.setflags(write=False)
        return cls(n=radii.size - 1, leg_count=leg_count, legs_path=legs_path, radii=radii,
                   local_times=MappingProxyType(lt), leg_maxima=tuple(int(m) for m in maxima),
                   zero_count=lt.get(BODY, 0))

    @property
    def overall_max(self) -> int:
        return max(self.leg_maxima) if self.leg_maxima else 0

    def local_time(self, where: SpiderSite, start: int = 0, stop: int | None = None) -> int:
        """Visits to ``where`` at times ``start <= k < stop`` (default: all of ``0..n``)."""
        stop = self.n + 1 if stop is None else stop
        if where.radius == 0:
            hit = self.radii[start:stop] == 0
        else:
            hit = (self.radii[start:stop] == where.radius) & (self.legs_path[start:stop] == where.leg)
        return int(np.count_nonzero(hit))

    def zero_count_open(self) -> int:
        """Body visits at ``1 <= k < n`` (the excursion-count convention)."""
        return self.local_time(BODY, 1, self.n)

    def visits_at(self, radius: int) -> np.ndarray:
        """Per-leg local time at height ``radius`` (index j-1 for leg j)."""
        out = np.zeros(self.leg_count, dtype=np.int64)
        for j in range(1, self.leg_count + 1):
            out[j - 1] = self.local_times.get(SpiderSite(j, radius), 0)
        return out


def _steps_of(config) -> int:
    return config.steps if isinstance(config, ExperimentConfig) else int(config.n)


def walk_spider(config: ExperimentConfig, source) -> WalkSummary:
    """Run ``config.steps`` transitions from the body with :func:`step_spider`."""
    n = _steps_of(config)
    if n < 0:
        raise InvalidArgumentError(f"n must be >= 0, got {n}")
    legs = np.zeros(n + 1, dtype=np.int64)
    radii = np.zeros(n + 1, dtype=np.int64)
    state = BODY
    for t in range(1, n + 1):
        state = step_spider(state, config.N, source)
        legs[t], radii[t] = state
    return WalkSummary.from_path(legs, radii, config.N)


def event_M(summary: WalkSummary, R: int) -> bool:
    """Every leg has been visited at height ``R`` at least once."""
    if R < 1:
        raise InvalidArgumentError(f"R must be >= 1, got {R}")
    return min(summary.leg_maxima) >= R


def event_A(summary: WalkSummary, R: int, k: int) -> bool:
    """Every leg has been visited at height ``R`` at least ``k`` times."""
    if R < 1 or k < 1:
        raise InvalidArgumentError(f"need R >= 1 and k >= 1, got R={R}, k={k}")
    return int(summary.visits_at(R).min()) >= k


def min_leg_max(summary: WalkSummary) -> int:
    return min(summary.leg_maxima)
