"""Shared test helpers, chiefly an exhaustive enumerator of random draws."""
from fractions import Fraction

import numpy as np
import pytest

from spiderwalk.rng import source_for


class _Replay:
    """Random source that follows a prescribed sequence of digit choices.

    Digits past the prescribed prefix are taken as 0 and their radix is
    recorded, which lets :func:`enumerate_outcomes` walk the whole tree.
    """

    def __init__(self, prefix):
        self.prefix = list(prefix)
        self.pos = 0
        self.radices = []
        self.digits = []

    def _next(self, radix):
        d = self.prefix[self.pos] if self.pos < len(self.prefix) else 0
        self.pos += 1
        self.radices.append(radix)
        self.digits.append(d)
        return d

    def fair_bits(self, count):
        return np.array([self._next(2) for _ in range(int(count))], dtype=np.uint8)

    def choice_index(self, n, count):
        return np.array([self._next(int(n)) for _ in range(int(count))], dtype=np.int64)


def enumerate_outcomes(fn):
    """Exact law of ``fn(source)`` over all draw sequences, as {outcome: Fraction}."""
    law = {}
    prefix = []
    while True:
        src = _Replay(prefix)
        out = fn(src)
        p = Fraction(1)
        for r in src.radices:
            p /= r
        law[out] = law.get(out, Fraction(0)) + p
        digits, radices = src.digits, src.radices
        i = len(digits) - 1
        while i >= 0 and digits[i] == radices[i] - 1:
            i -= 1
        if i < 0:
            return law
        prefix = digits[:i] + [digits[i] + 1]


@pytest.fixture
def source():
    return source_for(12345, 0)


ACCEPTANCE_LINES = []


@pytest.fixture
def report():
    """Print one PASS/FAIL line for an acceptance criterion, then assert it."""

    def emit(number, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
        print(line)
        ACCEPTANCE_LINES.append(line)
        assert ok, line

    return emit


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
