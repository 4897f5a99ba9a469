import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import enumerate_outcomes
from spiderwalk.config import ExperimentConfig
from spiderwalk.errors import InvalidArgumentError, InvalidConfigurationError
from spiderwalk.rng import source_for
from spiderwalk.spider import (BODY, SpiderSite, WalkSummary, event_A, event_M, min_leg_max, site,
                               step_spider, walk_spider)


def walk(N, n, seed=0):
    return walk_spider(ExperimentConfig(N=N, n=n), source_for(seed, 0))


def summary_from(leg_maxima_path):
    legs, radii = zip(*leg_maxima_path)
    return WalkSummary.from_path(legs, radii, 3)


def test_body_is_canonical():
    assert site(5, 0) == BODY and BODY.is_body
    with pytest.raises(InvalidArgumentError):
        site(1, -1)


def test_step_from_body_is_uniform():
    src = source_for(0, 0)
    counts = np.zeros(4)
    for _ in range(30000):
        s = step_spider(BODY, 3, src)
        assert s.radius == 1
        counts[s.leg] += 1
    assert counts[0] == 0
    assert ((counts[1:] - 10000) ** 2 / 10000).sum() < 13.8     # chi-square(2) 0.999


def test_step_law_exact():
    law = enumerate_outcomes(lambda s: step_spider(BODY, 3, s))
    assert law == {SpiderSite(j, 1): Fraction(1, 3) for j in (1, 2, 3)}
    law = enumerate_outcomes(lambda s: step_spider(SpiderSite(2, 5), 7, s))
    assert law == {SpiderSite(2, 4): Fraction(1, 2), SpiderSite(2, 6): Fraction(1, 2)}
    assert enumerate_outcomes(lambda s: step_spider(BODY, 1, s)) == {SpiderSite(1, 1): 1}


def test_step_errors():
    with pytest.raises(InvalidConfigurationError):
        step_spider(BODY, 0, source_for(0, 0))


def test_empty_walk():
    s = walk(3, 0)
    assert dict(s.local_times) == {BODY: 1}
    assert s.leg_maxima == (0, 0, 0)
    assert not event_M(s, 1) and not event_A(s, 1, 1)


def test_one_step_two_legs():
    law = enumerate_outcomes(lambda src: walk_spider(ExperimentConfig(N=2, n=1), src).leg_maxima)
    assert law == {(1, 0): Fraction(1, 2), (0, 1): Fraction(1, 2)}


def _brute_leg_maxima(N, n):
    """Independent enumeration over explicit paths of sites."""
    law = {}

    def rec(t, leg, r, maxima, p):
        if t == n:
            law[maxima] = law.get(maxima, 0) + p
            return
        if r == 0:
            for j in range(N):
                m = list(maxima)
                m[j] = max(m[j], 1)
                rec(t + 1, j, 1, tuple(m), p / N)
        else:
            for dr in (1, -1):
                m = list(maxima)
                m[leg] = max(m[leg], r + dr)
                rec(t + 1, leg, r + dr, tuple(m), p / 2)

    rec(0, 0, 0, (0,) * N, Fraction(1))
    return law


def test_four_steps_two_legs_matches_brute_force():
    law = enumerate_outcomes(lambda src: walk_spider(ExperimentConfig(N=2, n=4), src).leg_maxima)
    assert law == _brute_leg_maxima(2, 4)


@pytest.mark.parametrize("n", range(0, 13))
def test_single_leg_is_reflected_walk(n):
    law = enumerate_outcomes(lambda src: walk_spider(ExperimentConfig(N=1, n=n), src).leg_maxima[0])
    ref = {}
    for steps in itertools.product((1, -1), repeat=n):
        h, m = 0, 0
        for d in steps:
            h = abs(h + d)
            m = max(m, h)
        ref[m] = ref.get(m, 0) + Fraction(1, 2 ** n)
    assert law == ref


@pytest.mark.parametrize("n", range(0, 13))
def test_two_legs_is_signed_walk(n):
    law = enumerate_outcomes(lambda src: walk_spider(ExperimentConfig(N=2, n=n), src).overall_max)
    ref = {}
    for steps in itertools.product((1, -1), repeat=n):
        s = np.cumsum((0,) + steps)
        m = int(np.abs(s).max())
        ref[m] = ref.get(m, 0) + Fraction(1, 2 ** n)
    assert law == ref


@given(st.integers(1, 6), st.integers(0, 400), st.integers(0, 2**32))
@settings(max_examples=40, deadline=None)
def test_summary_invariants(N, n, seed):
    s = walk(N, n, seed)
    assert sum(s.local_times.values()) == n + 1
    assert s.zero_count == s.local_times.get(BODY, 0)
    assert s.overall_max == max(s.leg_maxima)
    for (leg, r), count in s.local_times.items():
        assert r <= n and count > 0
    assert all(r % 2 == t % 2 for t, r in enumerate(s.radii))
    entered = {site_.leg for site_ in s.local_times if site_.radius > 0}
    assert all((m >= 1) == (j + 1 in entered) for j, m in enumerate(s.leg_maxima))
    for R in (1, 2, 3):
        assert event_A(s, R, 1) == event_M(s, R)


def test_event_examples():
    # hand-built summary: legs (3, 2, 5)
    path = [(0, 0), (1, 1), (1, 2), (1, 3), (1, 2), (1, 1), (0, 0), (2, 1), (2, 2), (2, 1), (0, 0),
            (3, 1), (3, 2), (3, 3), (3, 4), (3, 5)]
    s = summary_from(path)
    assert s.leg_maxima == (3, 2, 5)
    assert event_M(s, 2) and not event_M(s, 3)
    assert min_leg_max(s) == 2
    assert list(s.visits_at(2)) == [2, 1, 1]
    assert event_A(s, 2, 1) and not event_A(s, 2, 2)
    with pytest.raises(InvalidArgumentError):
        event_M(s, 0)
    with pytest.raises(InvalidArgumentError):
        event_A(s, 1, 0)


def test_unvisited_leg_and_single_leg():
    s = summary_from([(0, 0), (1, 1), (1, 2), (1, 1), (0, 0), (3, 1)])
    assert s.leg_maxima == (2, 0, 1) and not event_M(s, 1) and min_leg_max(s) == 0
    one = walk(1, 50)
    assert min_leg_max(one) == one.overall_max


def test_local_time_conventions():
    s = summary_from([(0, 0), (1, 1), (0, 0), (2, 1), (0, 0)])
    assert s.local_time(BODY) == 3          # closed range k <= n
    assert s.zero_count_open() == 1         # 1 <= k < n
