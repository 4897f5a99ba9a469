"""Excursions of the reflected walk and the excursions-into-urns spider model.

Conventions used throughout this module:

* ``xi0(n)`` counts zeros at times ``1 <= k < n``;
* ``zeta(L, n)`` counts excursions that start at a zero ``1 <= k < n`` and
  hit height ``L`` before returning to 0, even if that happens after ``n``
  (mode ``"by-n"``, the default);
* ``"reached"`` mode only credits an excursion that has hit ``L`` by time n;
* ``H(n)`` is the first zero at or after ``n`` that closes the excursion
  running at ``n``.  No excursion starts in ``[n, H(n))``, so ``"by-H"``
  counts the same starts as ``"by-n"``.

The spider walk reuses the first excursion (the one leaving the body at time
0) as well, so spider-level counts take ``include_origin=True``.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import _kernels as K
from .config import ExperimentConfig
from .errors import InvalidArgumentError, ResourceBudgetError
from .spider import WalkSummary
from .urns import coverage_prob_at_least_k

TALL_MODES = ("by-n", "by-H", "reached")
CHUNK_STEPS = 1 << 22


@dataclass(frozen=True)
class ExcursionRecord:
    start_index: int
    length: int | None
    max_height: int
    assigned_leg: int | None = None
    eventual_max: int | None = None

    @property
    def complete(self) -> bool:
        return self.length is not None


@dataclass(frozen=True, eq=False)
class ReflectedPath:
    """Heights ``|S_0|, ..., |S_end|``; ``end`` is n, or H(n) once completed."""

    n: int
    heights: np.ndarray
    completed: bool = False

    @property
    def end(self) -> int:
        return self.heights.size - 1


@dataclass(frozen=True)
class ZeroLedger:
    level: int
    zero_times: tuple
    zero_count_n: int
    excursion_start_count: int
    tall_count_n: int
    completion_time: int | None

    @property
    def tall_count_H(self) -> int:
        # no excursion starts in [n, H(n)), so the H(n) count equals the n count
        return self.tall_count_n


def _heights_from_bits(bits, start=0):
    steps = bits.astype(np.int64) * 2 - 1
    return np.cumsum(steps) + start


def reaches_before_return(height: int, level: int, source, block: int = 256) -> bool:
    """Run the walk from ``height`` until it hits 0 or ``level``; report which came first."""
    if height <= 0:
        return False
    if height >= level:
        return True
    h = height
    while True:
        path = _heights_from_bits(source.fair_bits(block), h)
        hit = np.flatnonzero((path <= 0) | (path >= level))
        if hit.size:
            return bool(path[hit[0]] >= level)
        h = int(path[-1])


def _complete(signed: np.ndarray, source, max_extra: int) -> np.ndarray:
    last = int(signed[-1])
    pieces = [signed]
    used = 0
    block = 1024
    while last != 0:
        if used + block > max_extra:
            raise ResourceBudgetError(
                f"completing the running excursion needed more than {max_extra} extra steps",
                required=used + block, budget=max_extra)
        cont = _heights_from_bits(source.fair_bits(block), last)
        zero = np.flatnonzero(cont == 0)
        if zero.size:
            pieces.append(cont[: zero[0] + 1])
            break
        pieces.append(cont)
        used += block
        last = int(cont[-1])
        block *= 2
    return np.concatenate(pieces)


def reflected_walk(n: int, source, level: int = 1, complete: bool = False,
                   max_extra: int = 1 << 26) -> tuple[ReflectedPath, ZeroLedger]:
    """Simulate ``|S_k|`` for ``k = 0..n`` and its zero ledger at ``level``.

    With ``complete=True`` the walk keeps going past ``n`` until the running
    excursion returns to 0, which fixes ``H(n)``.  Otherwise a running
    excursion that has not yet reached ``level`` is resolved by continuing
    only until it hits 0 or ``level`` (enough to decide whether it is tall).
    """
    if n < 0:
        raise InvalidArgumentError(f"n must be >= 0, got {n}")
    signed = np.concatenate([[0], _heights_from_bits(source.fair_bits(n))]) if n else np.zeros(1, np.int64)
    if complete:
        signed = _complete(signed, source, max_extra)
    path = ReflectedPath(n, np.abs(signed), completed=complete)
    return path, zero_ledger(path, level, source)


def decompose_excursions(path: ReflectedPath) -> list[ExcursionRecord]:
    """Zero-to-zero segments of the path that start before time n."""
    n = path.n
    h = path.heights
    head = h[: n + 1]
    zeros = np.flatnonzero(head == 0)
    starts = zeros[zeros < n]
    if starts.size == 0:
        return []
    maxima = np.maximum.reduceat(head, starts)
    records = []
    for i, s in enumerate(starts):
        s = int(s)
        if i + 1 < starts.size:
            length = int(starts[i + 1]) - s
        elif head[n] == 0:
            length = n - s
        else:
            length = None
        rec = ExcursionRecord(s, length, int(maxima[i]))
        if length is not None:
            rec = replace(rec, eventual_max=rec.max_height)
        elif path.completed:
            rec = replace(rec, eventual_max=int(h[s:].max()))
        records.append(rec)
    return records


def _is_tall(rec: ExcursionRecord, L: int, mode: str) -> bool:
    if rec.max_height >= L:
        return True
    if mode == "reached" or rec.complete:
        return False
    if rec.eventual_max is None:
        raise InvalidArgumentError(
            f"excursion starting at {rec.start_index} is still running and has not reached {L}; "
            "complete the path or use mode='reached'")
    return rec.eventual_max >= L


def tall_count(records, L: int, mode: str = "by-n", include_origin: bool = False) -> int:
    """Number of excursions that reach height ``L`` (see module conventions)."""
    if L < 1:
        raise InvalidArgumentError(f"L must be >= 1, got {L}")
    if mode not in TALL_MODES:
        raise InvalidArgumentError(f"mode must be one of {TALL_MODES}, got {mode!r}")
    lo = 0 if include_origin else 1
    return sum(1 for r in records if r.start_index >= lo and _is_tall(r, L, mode))


def zero_ledger(path: ReflectedPath, level: int, source=None) -> ZeroLedger:
    n = path.n
    h = path.heights
    zeros = np.flatnonzero(h == 0)
    xi = int(np.count_nonzero((zeros >= 1) & (zeros < n)))
    if h[n] == 0 and n > 0:
        completion = n
    elif path.completed:
        completion = int(zeros[-1])
    else:
        completion = None
    records = decompose_excursions(path)
    tall = 0
    for rec in records:
        if rec.start_index < 1:
            continue
        if rec.max_height >= level:
            tall += 1
        elif not rec.complete:
            if rec.eventual_max is not None:
                tall += rec.eventual_max >= level
            elif source is None:
                raise InvalidArgumentError("a random source is needed to resolve the running excursion")
            else:
                tall += reaches_before_return(int(h[n]), level, source)
    shown = zeros[zeros <= (completion if completion is not None else n)]
    return ZeroLedger(level, tuple(int(z) for z in shown), xi, xi, tall, completion)


def sample_excursion_max(source) -> int:
    """Height of a fresh excursion: ``P(max >= m) = 1/m``, by inversion of one uniform."""
    return int(sample_excursion_maxima(1, source)[0])


def sample_excursion_maxima(count: int, source) -> np.ndarray:
    u = source.uniforms(count)
    return np.maximum(np.floor(1.0 / u), 1).astype(np.int64)


def simulate_excursion_maxima(count: int, cap: int, source) -> np.ndarray:
    """Maxima of ``count`` excursions walked step by step, each stopped at 0 or ``cap``.

    Returns ``min(max, cap)``, which decides ``max >= L`` for every ``L <= cap``.
    All unfinished excursions advance together, one fair bit each per step.
    """
    if count < 0 or cap < 1:
        raise InvalidArgumentError(f"need count >= 0 and cap >= 1, got {count}, {cap}")
    height = np.ones(count, np.int64)
    top = np.ones(count, np.int64)
    live = np.flatnonzero(height < cap)
    while live.size:
        h = height[live] + source.fair_bits(live.size).astype(np.int64) * 2 - 1
        height[live] = h
        top[live] = np.maximum(top[live], h)
        live = live[(h > 0) & (h < cap)]
    return top


def assign_legs(records, N: int, source) -> list[ExcursionRecord]:
    """Give every excursion an independent uniform leg in ``1..N``."""
    if N < 1:
        raise InvalidArgumentError(f"N must be >= 1, got {N}")
    legs = source.choice_index(N, len(records)) + 1
    return [replace(r, assigned_leg=int(j)) for r, j in zip(records, legs)]


def walk_via_excursions(config: ExperimentConfig, source) -> WalkSummary:
    """Spider walk built from ``|S|`` by throwing each excursion onto a random leg."""
    n = config.steps
    path, _ = reflected_walk(n, source)
    records = assign_legs(decompose_excursions(path), config.N, source)
    h = path.heights[: n + 1]
    legs_path = np.zeros(n + 1, dtype=np.int64)
    if records:
        starts = np.array([r.start_index for r in records])
        legs = np.array([r.assigned_leg for r in records])
        owner = np.searchsorted(starts, np.arange(n + 1), side="right") - 1
        legs_path = np.where(h > 0, legs[np.maximum(owner, 0)], 0)
    return WalkSummary.from_path(legs_path, h, config.N)


def rao_blackwell_coverage(G: int, N: int, k: int) -> float:
    """Exact chance that G uniformly placed tall excursions give every leg at least k."""
    return coverage_prob_at_least_k(N, G, k)


# -- compiled streaming scans ---------------------------------------------

@dataclass(frozen=True, eq=False)
class PathScan:
    """Excursion table of one n-step reflected walk from the compiled kernel.

    Arrays describe the excursions that closed by time n, in order; the
    ``running_*`` fields describe the one still open at n (``running_start``
    is -1 when ``S_n = 0``).  ``visits`` counts returns to ``level``.
    """

    n: int
    level: int
    starts: np.ndarray
    lengths: np.ndarray
    maxima: np.ndarray
    visits: np.ndarray
    final_height: int
    running_start: int
    running_max: int
    running_visits: int
    path_max: int

    @property
    def zero_count(self) -> int:
        """``xi0(n)``: zeros at ``1 <= k < n``."""
        closed = self.starts.size
        return closed - (1 if self.final_height == 0 and self.n > 0 else 0)

    def all_visits(self) -> np.ndarray:
        """Visits to ``level`` of every excursion started in ``[0, n)``."""
        if self.running_start >= 0:
            return np.append(self.visits, self.running_visits)
        return self.visits

    def all_maxima(self) -> np.ndarray:
        if self.running_start >= 0:
            return np.append(self.maxima, self.running_max)
        return self.maxima

    def weight_counts(self, kcap: int) -> np.ndarray:
        """Histogram of ``min(visits, kcap)`` over excursions started in ``[0, n)``."""
        return np.bincount(np.minimum(self.all_visits(), kcap), minlength=kcap + 1)[: kcap + 1]

    def tall_reached(self, L: int, include_origin: bool = True) -> int:
        m = self.all_maxima()
        lo = 0 if include_origin else 1
        st = np.append(self.starts, self.running_start) if self.running_start >= 0 else self.starts
        return int(np.count_nonzero((m >= L) & (st >= lo)))

    def zeta(self, L: int, source=None) -> int:
        """``zeta(L, n)`` in the default "by-n" mode; resolves the running excursion if needed."""
        closed = int(np.count_nonzero((self.maxima >= L) & (self.starts >= 1)))
        if self.running_start < 1:
            return closed
        if self.running_max >= L:
            return closed + 1
        if source is None:
            raise InvalidArgumentError("a random source is needed to resolve the running excursion")
        return closed + int(reaches_before_return(self.final_height, L, source))


def scan_path(n: int, source, level: int = 1, chunk: int = CHUNK_STEPS) -> PathScan:
    """Stream an n-step reflected walk through the compiled kernel.

    Consumes exactly the same bits as :func:`reflected_walk` would, so on a
    fresh source the two see the same path.
    """
    if n < 0:
        raise InvalidArgumentError(f"n must be >= 0, got {n}")
    chunk = max(64, chunk - chunk % 64)
    state = K.new_reflected_state()
    parts = []
    done = 0
    while done < n:
        m = min(chunk, n - done)
        words = source.fair_bit_block(m)
        cap = m // 2 + 2
        st = np.empty(cap, np.int64)
        ln = np.empty(cap, np.int64)
        mx = np.empty(cap, np.int64)
        vs = np.empty(cap, np.int64)
        c = K.excursion_chunk(words, m, level, state, st, ln, mx, vs)
        parts.append((st[:c].copy(), ln[:c].copy(), mx[:c].copy(), vs[:c].copy()))
        done += m
    if parts:
        starts, lengths, maxima, visits = (np.concatenate(x) for x in zip(*parts))
    else:
        starts = lengths = maxima = visits = np.empty(0, np.int64)
    s = int(state[K.S])
    running = int(state[K.CUR_START]) if s != 0 or n == 0 else -1
    if n == 0:
        running = -1
    return PathScan(n, level, starts, lengths, maxima, visits, abs(s), running,
                    int(state[K.CUR_MAX]), int(state[K.CUR_VISITS]), int(state[K.PATH_MAX]))


@dataclass(frozen=True)
class Lemma31Sample:
    """Tall and zero counts of one path at time n and at the completion time H(n)."""

    zeta_reached_n: int     # starts in [1, n) that reached L by time n
    zeta_n: int             # starts in [1, n) that reach L before returning to 0
    zeta_H: int             # starts in [1, H(n)) that reached L by time H(n)
    xi_n: int
    xi_H: int

    @property
    def max_gap(self) -> int:
        return max(abs(self.zeta_H - self.zeta_n), abs(self.zeta_H - self.zeta_reached_n),
                   abs(self.xi_H - self.xi_n))


def lemma31_sample(n: int, L: int, source) -> Lemma31Sample:
    """Counts at n and at H(n) for one path.

    Past n the running excursion is followed only until it hits 0 or L,
    which settles its contribution to ``zeta(L, H(n))``: it closes at H(n),
    so it is tall by H(n) exactly when it reaches L before 0, and no other
    excursion starts in ``[n, H(n))``.  The zero counts at H(n) follow the
    same way: the walk is away from 0 on ``(n, H(n))``.
    """
    scan = scan_path(n, source, level=L)
    reached = scan.tall_reached(L, include_origin=False)
    closed_tall = int(np.count_nonzero((scan.maxima >= L) & (scan.starts >= 1)))
    running_counts = scan.running_start >= 1
    running_tall = running_counts and (
        scan.running_max >= L or reaches_before_return(scan.final_height, L, source))
    # the "by-n" count and the H(n) count share the same resolution of
    # the running excursion; the H(n) count also takes the reached-by-n view of
    # closed excursions, which closed before n and so are settled either way
    zeta_n = closed_tall + int(running_tall)
    zeta_H = int(np.count_nonzero((scan.maxima >= L) & (scan.starts >= 1))) + int(running_tall)
    starts = np.append(scan.starts, scan.running_start) if scan.running_start >= 0 else scan.starts
    xi_H = int(np.count_nonzero(starts >= 1))
    return Lemma31Sample(reached, zeta_n, zeta_H, scan.zero_count, xi_H)
