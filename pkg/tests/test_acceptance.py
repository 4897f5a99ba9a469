"""Acceptance criteria 1-14.  Each test prints one PASS/FAIL line and asserts it.

Expected values are computed here from independent routes (brute force,
linear solves, Poisson approximations, closed forms) before comparison.
"""
import math
import os
import time
from math import factorial

import numpy as np
import pytest
from scipy import stats as sps

from conftest import enumerate_outcomes
from spiderwalk.cli import main as cli_main
from spiderwalk.config import ExperimentConfig
from spiderwalk.excursions import lemma31_sample, simulate_excursion_maxima, walk_via_excursions
from spiderwalk.limits import estimate_limit_probability, p_of_c, sweep_f_schedule, verify_lemma32
from spiderwalk.rng import source_for
from spiderwalk.spider import walk_spider
from spiderwalk.stats import BernoulliSumSpec, hoeffding_check, wilson_ci
from spiderwalk.strassen import (Polyline, StrassenQuery, dirichlet_energy, distinct_legs_check,
                                 dyadic_checkpoints, local_maxima_of_abs, minimize_segments,
                                 polyline_projection, theorem16_statistic, zigzag)
from spiderwalk.urns import coverage_prob_at_least_k, coverage_prob_exact

WORKERS = os.cpu_count() or 1
SEED = 20261015


# -- criterion 1 --------------------------------------------------------------

def _all_occupancy_vectors(N, G):
    """Urn counts of every one of the N^G assignments, built one ball at a time."""
    counts = np.zeros((1, N), dtype=np.int8)
    eye = np.eye(N, dtype=np.int8)
    yield 0, counts
    for g in range(1, G + 1):
        counts = (counts[:, None, :] + eye[None, :, :]).reshape(-1, N)
        yield g, counts


def test_criterion_1_occupancy_oracle(report):
    t0 = time.perf_counter()
    worst = 0.0
    for N in range(1, 6):
        for G, counts in _all_occupancy_vectors(N, 10):
            assert counts.shape[0] == N ** G
            low = counts.min(axis=1)
            for k in (1, 2, 3):
                brute = np.count_nonzero(low >= k) / N ** G
                got = coverage_prob_at_least_k(N, G, k)
                worst = max(worst, abs(got - brute))
                if k == 1:
                    worst = max(worst, abs(coverage_prob_exact(N, G) - brute))
    elapsed = time.perf_counter() - t0
    report(1, worst <= 1e-12 and elapsed < 10,
           f"max |exact - enumeration| = {worst:.2e} over N<=5, G<=10, k<=3 in {elapsed:.1f}s")


# -- criteria 2 and 3 ---------------------------------------------------------

def _poisson_all_at_least(N, G, m):
    lam = G / N
    tail = math.exp(-lam) * sum(lam ** i / factorial(i) for i in range(m))
    return (1 - tail) ** N


def test_criterion_2_coupon_collector_limit(report):
    t0 = time.perf_counter()
    N = 10 ** 4
    gaps = []
    for x in (-1, 0, 1, 2):
        balls = math.ceil(N * math.log(N) + N * x)
        exact = coverage_prob_exact(N, balls)
        assert abs(exact - _poisson_all_at_least(N, balls, 1)) < 1e-3   # independent sanity route
        gaps.append(abs(exact - math.exp(-math.exp(-x))))
    elapsed = time.perf_counter() - t0
    report(2, max(gaps) < 0.01 and elapsed < 60,
           f"N=1e4, gaps to exp(-e^-x) for x=-1,0,1,2: {', '.join(f'{g:.2e}' for g in gaps)}")


def test_criterion_3_two_per_urn_limit(report):
    N = 10 ** 4
    gaps, rows = [], []
    for x in (-1, 0, 1, 2):
        balls = math.ceil(N * math.log(N) + N * math.log(math.log(N)) + N * x)
        exact = coverage_prob_at_least_k(N, balls, 2)
        poisson = _poisson_all_at_least(N, balls, 2)
        assert abs(exact - poisson) < 1e-3
        limit = math.exp(-math.exp(-x))
        gaps.append(abs(exact - limit))
        rows.append(f"x={x}: {exact:.4f} vs {limit:.4f}")
    report(3, max(gaps) < 0.02, f"N=1e4, m=2, max gap {max(gaps):.3f} (tol 0.02); " + "; ".join(rows))


# -- criterion 4 --------------------------------------------------------------

def _reach_probability_by_linear_solve(L):
    """P(simple walk from 1 hits L before 0), from the harmonic equations on 0..L."""
    A = np.zeros((L + 1, L + 1))
    b = np.zeros(L + 1)
    A[0, 0] = A[L, L] = 1.0
    b[L] = 1.0
    for h in range(1, L):
        A[h, h] = 1.0
        A[h, h - 1] = A[h, h + 1] = -0.5
    return np.linalg.solve(A, b)[1]


def test_criterion_4_excursion_height_law(report):
    t0 = time.perf_counter()
    maxima = simulate_excursion_maxima(10 ** 5, 10, source_for(4, 0))
    misses = []
    for L in range(1, 11):
        oracle = _reach_probability_by_linear_solve(L) if L > 1 else 1.0
        assert abs(oracle - 1 / L) < 1e-12
        lo, hi = wilson_ci(int(np.count_nonzero(maxima >= L)), maxima.size, 0.99)
        if not lo <= oracle <= hi:
            misses.append(L)
    elapsed = time.perf_counter() - t0
    report(4, not misses and elapsed < 30,
           f"1e5 excursions, 1/L inside the 99% Wilson CI for L=1..10 (misses: {misses or 'none'}) "
           f"in {elapsed:.1f}s")


# -- criterion 5 --------------------------------------------------------------

def test_criterion_5_engine_equivalence(report):
    exact_ok = True
    for N in (1, 2, 3):
        for n in range(0, 9):
            cfg = ExperimentConfig(N=N, n=n)
            a = enumerate_outcomes(lambda s: walk_spider(cfg, s).leg_maxima)
            b = enumerate_outcomes(lambda s: walk_via_excursions(cfg, s).leg_maxima)
            exact_ok &= a == b
    cfg = ExperimentConfig(N=3, n=200)
    reps = 3000
    direct = [walk_spider(cfg, source_for(51, r)).leg_maxima for r in range(reps)]
    via = [walk_via_excursions(cfg, source_for(52, r)).leg_maxima for r in range(reps)]
    ks = sps.ks_2samp([m[0] for m in direct], [m[0] for m in via])
    low_a = np.bincount([min(m) for m in direct], minlength=40)[:40]
    low_b = np.bincount([min(m) for m in via], minlength=40)[:40]
    table = np.array([low_a, low_b])
    cut = 6
    pooled = np.column_stack([table[:, :cut], table[:, cut:].sum(axis=1)])
    chi = sps.chi2_contingency(pooled[:, pooled.sum(axis=0) > 0])
    ok = exact_ok and ks.pvalue > 0.01 and chi.pvalue > 0.01
    report(5, ok, f"exact laws equal for N<=3, n<=8: {exact_ok}; n=200 two-sample p-values "
                  f"KS(leg max)={ks.pvalue:.3f}, chi2(min leg max)={chi.pvalue:.3f}")


# -- criteria 6 and 7 ---------------------------------------------------------

def test_criterion_6_lemma31_pathwise(report):
    violations, worst = 0, 0
    grid = [(1000, 1), (1000, 4), (4096, 16)]
    for i, (n, L) in enumerate(grid):
        for r in range(10 ** 4):
            gap = lemma31_sample(n, L, source_for(600 + i, r)).max_gap
            worst = max(worst, gap)
            violations += gap > 1
    report(6, violations == 0, f"{violations} violations over 3 x 1e4 paths, grid {grid}, max gap {worst}")


def test_criterion_7_lemma32_frequency(report):
    parts, ok = [], True
    for n in (2 ** 14, 2 ** 16, 2 ** 18):
        for L in (2, 8):
            res = verify_lemma32(n, L, 1000, seed=700)
            ok &= res.within
            parts.append(f"n=2^{int(math.log2(n))},L={L}: {res.violations}")
    report(7, ok, "violations per 1000 paths: " + ", ".join(parts))


# -- criteria 8 and 10 --------------------------------------------------------

def _limit_rows(k, tol):
    rows, ok = [], True
    for c in (0.75, 1.0, 1.5):
        cfg = ExperimentConfig(N=200, L=1, k=k, c=c, replications=1000, seed=SEED, engine="rao-blackwell")
        est = estimate_limit_probability(cfg, workers=WORKERS)
        target = p_of_c(c)
        ok &= abs(est.point - target) <= tol
        rows.append(f"c={c}: {est.point:.4f} vs p(c)={target:.4f}")
    return ok, rows


def test_criterion_8_theorem11_desk_scale(report):
    assert p_of_c(1.0) == pytest.approx(0.3173, abs=1e-4)
    t0 = time.perf_counter()
    ok, rows = _limit_rows(1, 0.05)
    elapsed = time.perf_counter() - t0
    report(8, ok and elapsed < 600, "N=200, k=1, tol 0.05; " + "; ".join(rows) + f" ({elapsed:.0f}s)")


def test_criterion_10_theorem14_k2(report):
    ok, rows = _limit_rows(2, 0.07)
    report(10, ok, "N=200, k=2, tol 0.07; " + "; ".join(rows))


# -- criterion 9 --------------------------------------------------------------

def _monotone_with_one_overlap(estimates, increasing):
    """At most one inversion, and that one only between overlapping CIs."""
    inversions = 0
    for a, b in zip(estimates, estimates[1:]):
        wrong = b.point < a.point if increasing else b.point > a.point
        if wrong:
            inversions += 1
            if a.ci_high < b.ci_low or b.ci_high < a.ci_low:
                return False
    return inversions <= 1


def test_criterion_9_schedule_trends(report):
    Ns = [50, 100, 200, 400]
    up = sweep_f_schedule(ExperimentConfig(N=50, f_schedule="loglog", replications=1000, seed=SEED), Ns, WORKERS)
    down = sweep_f_schedule(ExperimentConfig(N=50, f_schedule="inv-loglog", replications=1000, seed=SEED),
                            Ns, WORKERS)
    up_est = [e for _, e in up]
    down_est = [e for _, e in down]
    mono = _monotone_with_one_overlap(up_est, True) and _monotone_with_one_overlap(down_est, False)
    end_up, end_down = up_est[-1].point, down_est[-1].point
    ok = mono and end_up > 0.9 and end_down < 0.1
    report(9, ok, f"monotone: {mono}; f=loglog: {', '.join(f'{e.point:.3f}' for e in up_est)} "
                  f"(endpoint > 0.9: {end_up > 0.9}); f=1/loglog: {', '.join(f'{e.point:.3f}' for e in down_est)} "
                  f"(endpoint < 0.1: {end_down < 0.1})")


# -- criterion 11 -------------------------------------------------------------

def test_criterion_11_hoeffding(report):
    worst, ok, cases = -math.inf, True, 0
    for i, (k, x, j_frac, p) in enumerate(
            (k, x, f, p) for k in (100, 1000, 10000) for x in (0.05, 0.1, 0.2)
            for f in (1.0, 0.5, 0.1) for p in (0.5, 0.2)):
        j = int(round(j_frac * k))
        res = hoeffding_check(BernoulliSumSpec(k, x, j), p, 20000, source_for(1100, i))
        bound = 2 * math.exp(-2 * k * x * x)
        assert res.bound == pytest.approx(bound)
        ok &= res.empirical <= bound + 3 * res.sigma
        worst = max(worst, res.empirical - bound)
        cases += 1
    report(11, ok, f"{cases} cases (j = k, k/2, k/10; p = 0.5, 0.2); max(empirical - bound) = {worst:.4f}")


# -- criterion 12 -------------------------------------------------------------

def _random_polyline(rng, m):
    xs = np.concatenate([[0.0], np.sort(rng.uniform(0, 1, m - 2)), [1.0]])
    xs = np.unique(xs)
    ys = np.concatenate([[0.0], rng.normal(0, 0.5, xs.size - 1)])
    return Polyline(xs, ys)


def test_criterion_12_strassen_analytics(report):
    energy_err, peaks_ok = 0.0, True
    for K in range(1, 11):
        z = zigzag(K)
        energy_err = max(energy_err, abs(dirichlet_energy(z) - 1.0))
        peaks = local_maxima_of_abs(z)
        peaks_ok &= peaks.size == K and bool(np.all(np.abs(peaks - 1 / (2 * K - 1)) <= 1e-12))
    agree = 0.0
    for K in range(1, 11):
        for a in (0.25, 0.5, 1.0):
            q = StrassenQuery(K, a)
            sol = minimize_segments(q)
            closed = q.alpha ** 2 * (2 * K - 1) ** 2 / a
            agree = max(agree, sol.agreement, abs(sol.energy - closed) / closed,
                        abs(sol.numeric_energy - closed) / closed)
    rng = np.random.default_rng(1200)
    increases = 0
    for _ in range(1000):
        f = _random_polyline(rng, int(rng.integers(3, 20)))
        keep = rng.random(f.breakpoints.size) < 0.5
        keep[0] = keep[-1] = True
        g = polyline_projection(f, f.breakpoints[keep])
        increases += dirichlet_energy(g) > dirichlet_energy(f) + 1e-12
    ok = energy_err <= 1e-12 and peaks_ok and agree <= 1e-9 and increases == 0
    report(12, ok, f"zigzag energy error {energy_err:.1e}, K peaks of 1/(2K-1): {peaks_ok}, "
                   f"closed form vs optimizer {agree:.1e}, projection increases {increases}/1000")


# -- criterion 13 -------------------------------------------------------------

def test_criterion_13_theorem16_band(report):
    parts, ok = [], True
    cps = dyadic_checkpoints(10 ** 8)
    assert cps[-1] == 10 ** 8
    for K in (2, 3):
        tr = theorem16_statistic(cps, K, source_for(SEED, K))
        ratio = tr.running_max[-1] / tr.target
        late = tr.statistic[tr.checkpoints >= 1024].max() / tr.target
        ok &= 0.3 < ratio < 1.6
        print(f"K={K} trajectory (n, statistic, running max, target):")
        for n, s, r, t in list(tr.rows())[::4] + [list(tr.rows())[-1]]:
            print(f"  {n:>10d}  {s:.4f}  {r:.4f}  {t:.4f}")
        exact = factorial(K) / K ** K
        dl = distinct_legs_check(K, 10 ** 5, source_for(1300, K), level=0.99)
        assert dl.exact == pytest.approx(exact)
        ok &= dl.covers_exact
        parts.append(f"K={K}: running max / target = {ratio:.3f} (over n >= 1024: {late:.3f}), distinct legs {dl.frequency:.4f} "
                     f"vs {exact:.4f} in [{dl.ci_low:.4f}, {dl.ci_high:.4f}]")
    report(13, ok, "; ".join(parts))


# -- criterion 14 -------------------------------------------------------------

MANIFEST = """\
[run]
seed = 1414

[theorem-1.1]
N = 40
c = 0.75, 1.5
replications = 200

[theorem-1.1:excursion]
N = 20
c = 1
engine = excursion
replications = 100

[theorem-1.4]
N = 30
replications = 100

[theorem-1.3]
N = 20, 40
replications = 100

[theorem-1.6]
n_max = 65536

[lemma-3.1]
n = 500
L = 2
paths = 200

[lemma-3.2]
n = 16384
L = 2
paths = 40

[lemma-e]
n_max = 4096
paths = 20

[erdos-renyi]
N = 200
x = 0
m = 1, 2
replications = 30

[hoeffding]
k = 100
replications = 500

[strassen-zigzag]
K = 1, 3
trials = 1000
"""


def test_criterion_14_determinism_across_workers(tmp_path, report):
    man = tmp_path / "manifest.ini"
    man.write_text(MANIFEST)
    outputs = {}
    for label, workers in (("w1", "1"), ("w2", "2"), ("w2-again", "2")):
        out = tmp_path / label
        assert cli_main(["run", str(man), "--workers", workers, "--output-dir", str(out)]) == 0
        outputs[label] = {p.name: p.read_bytes() for p in sorted(out.glob("*.csv"))}
    same = outputs["w1"] == outputs["w2"] == outputs["w2-again"]
    report(14, same and len(outputs["w1"]) == 11,
           f"{len(outputs['w1'])} CSVs byte-identical across workers 1, 2 and a rerun: {same}")
