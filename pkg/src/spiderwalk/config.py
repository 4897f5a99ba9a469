"""Experiment configuration shared by the walkers and the limit drivers."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .errors import InvalidConfigurationError

ENGINES = ("naive", "excursion", "rao-blackwell")

# Named f(N) sequences for the diverging / vanishing sweeps.
SCHEDULES = {
    "loglog": lambda N: math.log(math.log(N)),
    "inv-loglog": lambda N: 1.0 / math.log(math.log(N)),
    "sqrt-loglog": lambda N: math.sqrt(math.log(math.log(N))),
    "log": lambda N: math.log(N),
    "inv-log": lambda N: 1.0 / math.log(N),
}
DIVERGING = {"loglog", "sqrt-loglog", "log"}


def n_steps(N: int, L: int, c: float) -> int:
    """Step count ``ceil((c L N log N)^2)`` with the natural log."""
    if N < 2:
        raise InvalidConfigurationError(f"n_steps needs N >= 2 so that log N > 0, got N={N}")
    if L < 1:
        raise InvalidConfigurationError(f"L must be >= 1, got {L}")
    if not c > 0:
        raise InvalidConfigurationError(f"c must be positive, got {c}")
    return math.ceil((c * L * N * math.log(N)) ** 2)


@dataclass(frozen=True)
class ExperimentConfig:
    """One point of an experiment grid.

    ``n`` overrides the step count; otherwise it is derived from ``c`` (or
    from ``f_schedule`` evaluated at ``N``) through :func:`n_steps`.
    """

    N: int
    L: int = 1
    c: float = 1.0
    k: int = 1
    replications: int = 1000
    seed: int = 0
    engine: str = "rao-blackwell"
    f_schedule: str | None = None
    n: int | None = None
    epsilon: float = 0.1

    def __post_init__(self):
        if self.N < 1:
            raise InvalidConfigurationError(f"N must be >= 1, got {self.N}")
        if self.L < 1:
            raise InvalidConfigurationError(f"L must be >= 1, got {self.L}")
        if self.k < 1:
            raise InvalidConfigurationError(f"k must be >= 1, got {self.k}")
        if not self.c > 0:
            raise InvalidConfigurationError(f"c must be positive, got {self.c}")
        if self.replications < 1:
            raise InvalidConfigurationError("replications must be >= 1")
        if self.engine not in ENGINES:
            raise InvalidConfigurationError(f"unknown engine {self.engine!r}; choose from {', '.join(ENGINES)}")
        if self.f_schedule is not None and self.f_schedule not in SCHEDULES:
            raise InvalidConfigurationError(
                f"unknown f_schedule {self.f_schedule!r}; choose from {', '.join(sorted(SCHEDULES))}")
        if self.n is not None and self.n < 0:
            raise InvalidConfigurationError(f"n must be >= 0, got {self.n}")
        if not 0 <= self.seed < 2**64:
            raise InvalidConfigurationError("seed must fit in 64 bits")

    @property
    def scale(self) -> float:
        """The constant multiplying ``L N log N``: ``c`` or ``f(N)``."""
        if self.f_schedule is not None:
            return SCHEDULES[self.f_schedule](self.N)
        return self.c

    @property
    def steps(self) -> int:
        if self.n is not None:
            return self.n
        return n_steps(self.N, self.L, self.scale)

    @property
    def in_regime(self) -> bool:
        """Whether ``L <= N / log N`` (always False for N < 2)."""
        return self.N >= 2 and self.L <= self.N / math.log(self.N)

    @property
    def total_steps(self) -> int:
        return self.steps * self.replications

    def with_(self, **changes) -> "ExperimentConfig":
        return replace(self, **changes)
