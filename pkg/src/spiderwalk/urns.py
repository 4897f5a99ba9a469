"""Exact occupancy probabilities for G uniform balls in N urns.

Three evaluation routes, picked automatically:

* inclusion-exclusion over the set of deficient urns, summed in the log
  domain term by term and accumulated with ``math.fsum``; used when the
  alternating sum is well conditioned (roughly G >= N log N - O(N)),
* the urn-by-urn exponential generating function
  ``G! [x^G] (sum_{i>=k} x^i / i!)^N / N^G`` evaluated with log-domain
  polynomial products,
* ball-by-ball dynamic programmes on the histogram of urn deficiencies
  (probabilities only, no cancellation), which also yield whole tables
  over G at once.
"""
from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy.special import gammaln, logsumexp

from .errors import InvalidArgumentError, ResourceBudgetError

# Rough operation budgets; beyond these an explicit ResourceBudgetError is raised.
DP_BUDGET = 5 * 10**9
EGF_BUDGET = 4 * 10**9
HISTOGRAM_BUDGET = 2 * 10**9
_COND_LIMIT = 1e-10


def _check(N, G, k=1):
    if N < 1:
        raise InvalidArgumentError(f"N must be >= 1, got {N}")
    if G < 0:
        raise InvalidArgumentError(f"G must be >= 0, got {G}")
    if k < 1:
        raise InvalidArgumentError(f"k must be >= 1, got {k}")


def _log_deficit_counts(j_max: int, k: int, t_cap: int):
    """Yield ``log(t! [x^t] T(x)^j)`` for j = 0, 1, ..., with ``T = sum_{i<k} x^i/i!``.

    The quantity counts placements of t labelled balls into j labelled urns
    that leave every urn with fewer than k balls.
    """
    base = -gammaln(np.arange(k) + 1.0)
    poly = np.array([0.0])  # log coefficients of T^0
    for j in range(j_max + 1):
        t = np.arange(poly.size)
        yield poly + gammaln(t + 1.0)
        if j == j_max:
            return
        size = min(poly.size + k - 1, t_cap + 1)
        nxt = np.full(size, -np.inf)
        for i in range(k):
            seg = poly[: size - i]
            nxt[i:i + seg.size] = np.logaddexp(nxt[i:i + seg.size], seg + base[i])
        poly = nxt


def _inclusion_exclusion(N: int, G: int, k: int):
    """Alternating sum over deficient urn sets. Returns (value, relative error estimate)."""
    logG1 = gammaln(G + 1.0)
    logN = math.log(N)
    terms = []
    peak = -np.inf
    logC_N = gammaln(N + 1.0)
    for j, logw in enumerate(_log_deficit_counts(N, k, G)):
        t = np.arange(logw.size)
        if j == N:
            # every urn deficient: only t == G survives
            if G < logw.size:
                inner = logG1 - gammaln(G + 1.0) - gammaln(1.0) + logw[G] - G * logN
            else:
                inner = -np.inf
        else:
            rest = (G - t) * math.log1p(-j / N)
            inner = logsumexp(logG1 - gammaln(t + 1.0) - gammaln(G - t + 1.0) + logw - t * logN + rest)
        lt = logC_N - gammaln(j + 1.0) - gammaln(N - j + 1.0) + inner
        terms.append((-1) ** j * math.exp(lt) if lt > -745 else 0.0)
        peak = max(peak, lt)
        if j > 2 and lt < peak - 50 and lt < -50:
            break
    value = math.fsum(terms)
    magnitude = math.fsum(abs(x) for x in terms)
    rel = float("inf") if value <= 0 else 2.2e-16 * magnitude * (len(terms) + 1) / value
    return value, rel


def coverage_bonferroni(N: int, G: int) -> tuple[float, float]:
    """Two-term Bonferroni bracket ``1 - S1 <= P(all urns hit) <= 1 - S1 + S2``."""
    _check(N, G)
    s1 = N * math.exp(G * math.log1p(-1.0 / N)) if N > 1 else 0.0
    s2 = (N * (N - 1) / 2) * math.exp(G * math.log1p(-2.0 / N)) if N > 2 else 0.0
    return max(0.0, 1.0 - s1), min(1.0, 1.0 - s1 + s2)


def occupancy_table(N: int, G_max: int) -> np.ndarray:
    """``table[g, d]`` = P(exactly d of N urns are non-empty after g balls)."""
    _check(N, G_max)
    if (G_max + 1) * (N + 1) > DP_BUDGET:
        raise ResourceBudgetError(f"occupancy table needs {(G_max + 1) * (N + 1)} cells",
                                  required=(G_max + 1) * (N + 1), budget=DP_BUDGET)
    d = np.arange(N + 1, dtype=float)
    stay = d / N
    move = (N - d[:-1]) / N
    out = np.empty((G_max + 1, N + 1))
    p = np.zeros(N + 1)
    p[0] = 1.0
    out[0] = p
    for g in range(1, G_max + 1):
        new = p * stay
        new[1:] += p[:-1] * move
        p = new
        out[g] = p
    return out


@lru_cache(maxsize=32)
def _coverage_column(N: int, G_max: int) -> np.ndarray:
    d = np.arange(N + 1, dtype=float)
    stay = d / N
    move = (N - d[:-1]) / N
    col = np.empty(G_max + 1)
    p = np.zeros(N + 1)
    p[0] = 1.0
    col[0] = p[N]
    for g in range(1, G_max + 1):
        new = p * stay
        new[1:] += p[:-1] * move
        p = new
        col[g] = p[N]
    col.setflags(write=False)
    return col


def coverage_table(N: int, G_max: int) -> np.ndarray:
    """P(every urn non-empty) for G = 0..G_max, by the ball-by-ball recursion."""
    _check(N, G_max)
    if N * (G_max + 1) > DP_BUDGET:
        raise ResourceBudgetError(f"coverage table needs {N * (G_max + 1)} operations",
                                  required=N * (G_max + 1), budget=DP_BUDGET)
    # round the cache key up so nearby requests share one table
    size = 1 << max(6, int(G_max).bit_length())
    return _coverage_column(N, size)[: G_max + 1]


def coverage_prob_exact(N: int, G: int) -> float:
    """P(each of N urns receives at least one of G uniform balls)."""
    _check(N, G)
    if G < N:
        return 0.0
    if N == 1:
        return 1.0
    value, rel = _inclusion_exclusion(N, G, 1)
    if rel <= _COND_LIMIT:
        return min(1.0, max(0.0, value))
    return float(coverage_table(N, G)[G])


def _log_poly_mul(a: np.ndarray, b: np.ndarray, limit: int) -> np.ndarray:
    size = min(a.size + b.size - 1, limit + 1)
    out = np.full(size, -np.inf)
    rows = np.arange(size)
    bi = np.arange(b.size)
    for start in range(0, size, 256):
        g = rows[start:start + 256, None]
        idx = g - bi[None, :]
        valid = (idx >= 0) & (idx < a.size)
        m = np.where(valid, a[np.clip(idx, 0, a.size - 1)] + b[None, :], -np.inf)
        out[start:start + 256] = logsumexp(m, axis=1)
    return out


def _egf_at_least_k(N: int, G: int, k: int) -> float:
    steps = max(1, N.bit_length()) * 2
    if steps * (G + 1) ** 2 > EGF_BUDGET:
        raise ResourceBudgetError(
            f"generating-function evaluation for N={N}, G={G} exceeds the budget",
            required=steps * (G + 1) ** 2, budget=EGF_BUDGET)
    g = np.arange(G + 1)
    single = np.where(g >= k, -gammaln(g + 1.0), -np.inf)
    result = None
    power = single
    m = N
    while m:
        if m & 1:
            result = power if result is None else _log_poly_mul(result, power, G)
        m >>= 1
        if m:
            power = _log_poly_mul(power, power, G)
    if result.size <= G or not np.isfinite(result[G]):
        return 0.0
    return float(math.exp(gammaln(G + 1.0) - G * math.log(N) + result[G]))


def coverage_prob_at_least_k(N: int, G: int, k: int) -> float:
    """P(each of N urns receives at least k of G uniform balls)."""
    _check(N, G, k)
    if G < k * N:
        return 0.0
    if k == 1:
        return coverage_prob_exact(N, G)
    if N == 1:
        return 1.0
    value, rel = _inclusion_exclusion(N, G, k)
    if rel <= _COND_LIMIT:
        return min(1.0, max(0.0, value))
    return min(1.0, max(0.0, _egf_at_least_k(N, G, k)))


def coverage_prob_egf(N: int, G: int, k: int) -> float:
    """The generating-function route on its own (no inclusion-exclusion)."""
    _check(N, G, k)
    if G < k * N:
        return 0.0
    return min(1.0, max(0.0, _egf_at_least_k(N, G, k)))


def er_limit(x: float, m: int = 1) -> float:
    """Limit law ``exp(-exp(-x) / (m-1)!)`` of the balls-in-urns threshold."""
    if m < 1:
        raise InvalidArgumentError(f"m must be >= 1, got {m}")
    if x == math.inf:
        return 1.0
    if -x > 700:
        return 0.0
    return math.exp(-math.exp(-x) / math.factorial(m - 1))


def er_balls(N: int, x: float, m: int = 1) -> int:
    """``ceil(N log N + (m-1) N log log N + N x)``."""
    extra = (m - 1) * N * math.log(math.log(N)) if m > 1 else 0.0
    return math.ceil(N * math.log(N) + extra + N * x)


def throw_balls(N: int, balls: int, source) -> np.ndarray:
    """Occupancy vector of ``balls`` thrown uniformly into ``N`` urns."""
    _check(N, balls)
    return source.generator.multinomial(int(balls), np.full(N, 1.0 / N))


# -- weighted balls ------------------------------------------------------

def _histogram_states(N: int, k: int):
    grids = np.indices((N + 1,) * k).reshape(k, -1)
    keep = grids.sum(axis=0) <= N
    return grids[:, keep]


def coverage_prob_weighted(N: int, weight_counts, k: int) -> float:
    """P(every urn's total weight reaches k).

    ``weight_counts[w]`` balls of weight ``w`` are thrown uniformly and
    independently; weights above ``k`` act as ``k`` and weight 0 is ignored.
    Exact ball-by-ball recursion over the histogram of urn deficiencies.
    """
    if N < 1 or k < 1:
        raise InvalidArgumentError("need N >= 1 and k >= 1")
    counts = np.zeros(k + 1, dtype=np.int64)
    for w, c in enumerate(weight_counts):
        if c < 0:
            raise InvalidArgumentError("weight counts must be non-negative")
        counts[min(w, k)] += c
    if k == 1:
        return coverage_prob_exact(N, int(counts[1]))
    states = _histogram_states(N, k)  # row d-1 = number of urns still needing d
    nstates = states.shape[1]
    balls = int(counts[1:].sum())
    if nstates * balls * k > HISTOGRAM_BUDGET:
        raise ResourceBudgetError(f"weighted coverage needs ~{nstates * balls * k} operations",
                                  required=nstates * balls * k, budget=HISTOGRAM_BUDGET)
    strides = (N + 1) ** np.arange(k)[::-1]
    flat = strides @ states
    pos = np.full((N + 1) ** k, -1, dtype=np.int64)
    pos[flat] = np.arange(nstates)
    prob = np.zeros(nstates)
    start = np.zeros(k, dtype=np.int64)
    start[k - 1] = N
    prob[pos[strides @ start]] = 1.0
    satisfied = (N - states.sum(axis=0)) / N
    moves = {}
    for w in range(1, k + 1):
        for d in range(1, k + 1):
            src = np.flatnonzero(states[d - 1] > 0)
            shift = -strides[d - 1] + (strides[d - w - 1] if d - w >= 1 else 0)
            moves[w, d] = (src, pos[flat[src] + shift], states[d - 1, src] / N)
    # heaviest balls first; order is immaterial because the moves commute
    for w in range(k, 0, -1):
        for _ in range(int(counts[w])):
            new = prob * satisfied
            for d in range(1, k + 1):
                src, dst, frac = moves[w, d]
                np.add.at(new, dst, prob[src] * frac)
            prob = new
    return float(prob[pos[0]])


class WeightedCoverage:
    """Vectorised exact ``P(all N urns reach total weight k)`` for many ball mixes.

    For ``k == 1`` this is the plain coverage table.  For ``k == 2`` the
    weight-2 balls are thrown first; the number of urns they miss has the
    occupancy law, and a backward recursion gives the chance that a given
    set of untouched urns then collects two weight-1 balls each.  Higher k
    falls back to :func:`coverage_prob_weighted` per mix.
    """

    def __init__(self, N: int, k: int):
        if N < 1 or k < 1:
            raise InvalidArgumentError("need N >= 1 and k >= 1")
        self.N = N
        self.k = k
        self._occ = None
        self._back = None

    def _tables(self, a_max: int, b_max: int):
        N = self.N
        if self._occ is None or self._occ.shape[0] <= b_max:
            self._occ = occupancy_table(N, max(b_max, 64) * 2)
        if self._back is None or self._back.shape[0] <= a_max:
            rows = max(a_max, 64) * 2
            if rows * (N + 1) ** 2 > DP_BUDGET:
                raise ResourceBudgetError("weight-1 backward table too large",
                                          required=rows * (N + 1) ** 2, budget=DP_BUDGET)
            d2 = np.arange(N + 1)[:, None].astype(float)
            d1 = np.arange(N + 2)[None, :].astype(float)
            v = np.zeros((N + 2, N + 3))  # padded on both axes
            v[0, 0] = 1.0
            back = np.empty((rows + 1, N + 1))
            back[0] = v[: N + 1, 0]
            idle = np.clip(1.0 - (d2 + d1) / N, 0.0, None)
            for a in range(1, rows + 1):
                cur = v[: N + 1, : N + 2]
                new = idle * cur
                new[1:, :] += (d2[1:] / N) * v[: N, 1: N + 3]
                new[:, 1:] += (d1[:, 1:] / N) * cur[:, :-1]
                v = np.zeros_like(v)
                v[: N + 1, : N + 2] = new
                back[a] = new[:, 0]
            self._back = back
        return self._occ, self._back

    def probability(self, weight_counts) -> np.ndarray:
        """``weight_counts`` has shape (reps, k+1); column w counts balls of weight w."""
        wc = np.atleast_2d(np.asarray(weight_counts, dtype=np.int64))
        if wc.shape[1] < self.k + 1:
            raise InvalidArgumentError("need a column per weight 0..k")
        capped = wc[:, : self.k + 1].copy()
        capped[:, self.k] += wc[:, self.k + 1:].sum(axis=1)
        if self.k == 1:
            g = capped[:, 1]
            return coverage_table(self.N, int(g.max()))[g]
        if self.k == 2:
            a, b = capped[:, 1], capped[:, 2]
            occ, back = self._tables(int(a.max()), int(b.max()))
            # occupied count d  <->  N - d urns still need weight 2
            empty = occ[b][:, ::-1]
            return np.clip((empty * back[a]).sum(axis=1), 0.0, 1.0)
        return np.array([coverage_prob_weighted(self.N, row, self.k) for row in capped])
