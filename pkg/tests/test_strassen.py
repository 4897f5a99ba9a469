import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spiderwalk.errors import InvalidArgumentError, InvalidPolylineError
from spiderwalk.rng import source_for
from spiderwalk.strassen import (Polyline, StrassenQuery, best_distance_over_seeds, dirichlet_energy,
                                 distinct_legs_check, distinct_legs_probability, dyadic_checkpoints,
                                 lil_scale, local_maxima_of_abs, minimize_segments, polyline_projection,
                                 rescaled_path, segment_energy, signed_walk, theorem16_statistic, zigzag)


def test_zigzag_two():
    z = zigzag(2)
    assert np.allclose(z.breakpoints, [0, 1 / 3, 2 / 3, 1])
    assert np.allclose(z.values, [0, 1 / 3, 0, -1 / 3])
    one = zigzag(1)
    assert np.allclose(one.values, [0, 1]) and dirichlet_energy(one) == 1.0


@pytest.mark.parametrize("K", range(1, 11))
def test_zigzag_energy_and_peaks(K):
    z = zigzag(K)
    assert abs(dirichlet_energy(z) - 1) <= 1e-12
    assert np.allclose(np.abs(z.slopes), 1.0)
    peaks = local_maxima_of_abs(z)
    assert peaks.size == K and np.allclose(peaks, 1 / (2 * K - 1))
    # a zero of f between consecutive peaks
    idx = np.flatnonzero(np.isin(np.abs(z.values), peaks))
    for a, b in zip(idx, idx[1:]):
        assert np.any(z.values[a:b + 1] == 0)


def test_energy_examples():
    line = Polyline([0, 1], [0, 0.7])
    assert dirichlet_energy(line) == pytest.approx(0.49)
    z = zigzag(3)
    assert dirichlet_energy(z.scaled(2.5)) == pytest.approx(6.25 * dirichlet_energy(z))


def test_invalid_polylines():
    with pytest.raises(InvalidPolylineError):
        Polyline([0, 0.5, 0.5, 1], [0, 1, 1, 0])
    with pytest.raises(InvalidPolylineError):
        Polyline([0, 1], [0.1, 0])
    with pytest.raises(InvalidPolylineError):
        Polyline([0.1, 1], [0, 0])
    with pytest.raises(InvalidArgumentError):
        zigzag(0)


def test_projection_fixed_point_and_square():
    z = zigzag(2)
    p = polyline_projection(z, z.breakpoints)
    assert np.allclose(p.values, z.values) and dirichlet_energy(p) == pytest.approx(dirichlet_energy(z))
    sq = polyline_projection(lambda x: x * x, [0.0, 1.0])
    assert dirichlet_energy(sq) == pytest.approx(1.0) and 1.0 <= 4 / 3


def _random_polyline(rng, m):
    x = np.sort(rng.uniform(0, 1, m))
    x = np.concatenate([[0.0], x, [1.0]])
    x = np.unique(x)
    y = np.concatenate([[0.0], rng.normal(0, 0.5, x.size - 1)])
    return Polyline(x, y)


def test_projection_never_increases_energy():
    rng = np.random.default_rng(0)
    for _ in range(300):
        f = _random_polyline(rng, 12)
        sub = np.unique(np.concatenate([[0, 1], rng.choice(f.breakpoints, 5)]))
        g = polyline_projection(f, sub)
        assert dirichlet_energy(g) <= dirichlet_energy(f) + 1e-12


def test_refining_breakpoints_does_not_decrease_energy():
    rng = np.random.default_rng(1)
    f = lambda x: np.sin(3 * x) * x
    coarse = np.linspace(0, 1, 5)
    fine = np.linspace(0, 1, 9)          # contains coarse
    assert dirichlet_energy(polyline_projection(f, coarse)) <= dirichlet_energy(polyline_projection(f, fine))
    for _ in range(50):
        base = np.unique(np.concatenate([[0, 1], rng.uniform(0, 1, 4)]))
        finer = np.unique(np.concatenate([base, rng.uniform(0, 1, 4)]))
        assert (dirichlet_energy(polyline_projection(f, base))
                <= dirichlet_energy(polyline_projection(f, finer)) + 1e-12)


def test_segment_minimisation_examples():
    sol = minimize_segments(StrassenQuery(2, 1.0, 1 / 3))
    assert np.allclose(sol.lengths, 1 / 3) and sol.energy == pytest.approx(1.0)
    half = minimize_segments(StrassenQuery(2, 0.5, 1 / 3))
    assert half.energy == pytest.approx(2 * sol.energy)


@pytest.mark.parametrize("K", range(1, 11))
@pytest.mark.parametrize("a", [0.5, 1.0])
def test_closed_form_matches_optimizer(K, a):
    sol = minimize_segments(StrassenQuery(K, a))
    assert sol.agreement <= 1e-9
    assert abs(sol.numeric_energy - sol.energy) <= 1e-9 * sol.energy


@given(st.integers(1, 8), st.floats(0.1, 1.0), st.integers(0, 2**31))
@settings(max_examples=60, deadline=None)
def test_perturbations_raise_energy(K, a, seed):
    q = StrassenQuery(K, a)
    sol = minimize_segments(q)
    rng = np.random.default_rng(seed)
    m = q.segments
    if m == 1:
        return
    d = rng.normal(size=m)
    d -= d.mean()
    x = sol.lengths + 0.1 * a / m * d / np.max(np.abs(d))
    assert segment_energy(x, q.alpha) > sol.energy


def test_query_validation():
    with pytest.raises(InvalidArgumentError):
        StrassenQuery(0)
    with pytest.raises(InvalidArgumentError):
        StrassenQuery(2, 1.5)
    with pytest.raises(InvalidArgumentError):
        StrassenQuery(2, 1.0, -1.0)


def test_rescaled_path_distances():
    zero = rescaled_path(np.zeros(101))
    for K in (1, 2, 4):
        assert zero.distance_to(zigzag(K)) == pytest.approx(1 / (2 * K - 1))
    s = signed_walk(1000, source_for(0, 0))
    r = rescaled_path(s)
    flat = Polyline([0, 1], [0, 0])
    assert r.distance_to(flat) == pytest.approx(np.abs(s).max() / lil_scale(1000))
    with pytest.raises(InvalidArgumentError):
        rescaled_path(np.zeros(10))


def test_best_distance_running_minimum():
    d = best_distance_over_seeds(4096, zigzag(2), range(30), lambda s: source_for(s, 0))
    assert np.all(np.diff(d) <= 0) and d[-1] < d[0] + 1e-15


def test_theorem16_trace_properties():
    cps = dyadic_checkpoints(2 ** 16)
    tr = theorem16_statistic(cps, 2, source_for(0, 0), chunk=1024)
    assert np.all(np.diff(tr.running_max) >= 0)
    assert np.all(np.diff(tr.min_leg_max) >= 0)
    assert tr.target == pytest.approx(1 / 3)
    assert theorem16_statistic(cps, 3, source_for(0, 0)).target == pytest.approx(1 / 5)


def test_theorem16_single_leg_is_running_max():
    from spiderwalk.limits import max_at_checkpoints
    cps = dyadic_checkpoints(50000)
    tr = theorem16_statistic(cps, 1, source_for(2, 0))
    assert list(tr.min_leg_max) == list(max_at_checkpoints(cps, source_for(2, 0)))


def test_theorem16_chunking_invariance():
    cps = dyadic_checkpoints(10**5)
    a = theorem16_statistic(cps, 3, source_for(1, 0), chunk=64)
    b = theorem16_statistic(cps, 3, source_for(1, 0), chunk=1 << 20)
    assert np.array_equal(a.min_leg_max, b.min_leg_max)


def test_distinct_legs():
    assert distinct_legs_probability(2) == 0.5
    assert distinct_legs_probability(3) == pytest.approx(6 / 27)
    res = distinct_legs_check(3, 50000, source_for(5, 0))
    assert res.covers_exact
