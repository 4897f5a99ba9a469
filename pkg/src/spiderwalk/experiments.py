"""Registry of runnable experiments.

Each experiment turns a dict of parameters (lists for grid axes) into result
rows with a fixed column set, and knows how many walk steps it will take so
budgets can be checked before anything runs.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .config import ExperimentConfig, SCHEDULES
from .errors import InvalidArgumentError, InvalidConfigurationError
from .excursions import lemma31_sample
from .limits import (chung_statistic, estimate_limit_probability, exact_m1_probability,
                     p_of_c, resolve_level, verify_lemma32)
from .rng import source_for
from .stats import BernoulliSumSpec, hoeffding_check, wilson_ci
from .strassen import (StrassenQuery, dirichlet_energy, distinct_legs_check, dyadic_checkpoints,
                       local_maxima_of_abs, minimize_segments, theorem16_statistic, zigzag)
from .urns import coverage_prob_at_least_k, er_balls, er_limit, throw_balls

LIMIT_COLUMNS = ("experiment", "seed", "engine", "N", "L", "scale", "schedule", "k", "n",
                 "replications", "point", "ci_low", "ci_high", "target", "exact",
                 "in_regime", "B_minus", "B", "B_plus", "check")


@dataclass(frozen=True)
class Experiment:
    name: str
    statement: str
    target: str
    defaults: dict
    columns: tuple
    plot: tuple                 # (x column, estimate, ci_low, ci_high, target)
    tolerance: float | None
    runner: Callable = field(repr=False)
    steps: Callable = field(repr=False, default=lambda params: 0)

    def describe(self) -> str:
        lines = [self.name, "", self.statement, f"target: {self.target}", "parameters (defaults):"]
        for key, val in self.defaults.items():
            lines.append(f"  {key} = {_fmt_default(val)}")
        if self.tolerance is not None:
            lines.append(f"acceptance tolerance: {self.tolerance}")
        lines.append("columns: " + ", ".join(self.columns))
        return "\n".join(lines)


def _fmt_default(v):
    return ", ".join(str(x) for x in v) if isinstance(v, (list, tuple)) else str(v)


def _as_list(v):
    return list(v) if isinstance(v, (list, tuple)) else [v]


def grid(params: dict, axes) -> list[dict]:
    """Cartesian product over ``axes``; other keys are passed through as scalars."""
    lists = [_as_list(params[a]) for a in axes]
    base = {k: v for k, v in params.items() if k not in axes}
    return [dict(base, **dict(zip(axes, combo))) for combo in itertools.product(*lists)]


def _scalar(params, key):
    v = params[key]
    if isinstance(v, (list, tuple)):
        if len(v) != 1:
            raise InvalidConfigurationError(f"parameter {key} takes a single value, got {len(v)}")
        return v[0]
    return v


# -- limit-theorem experiments ------------------------------------------------

def _limit_config(p: dict, seed: int) -> ExperimentConfig:
    N = int(p["N"])
    try:
        L = resolve_level(N, p.get("L", 1)) if N >= 2 else int(p.get("L", 1))
    except InvalidArgumentError as exc:
        raise InvalidConfigurationError(str(exc)) from None
    return ExperimentConfig(N=N, L=L, c=float(p.get("c", 1.0)),
                            k=int(p.get("k", 1)), replications=int(p["replications"]), seed=seed,
                            engine=str(p["engine"]), f_schedule=p.get("schedule") or None,
                            epsilon=float(p.get("epsilon", 0.1)))


def _limit_axes(params):
    return [a for a in ("N", "L", "c", "k", "schedule") if a in params]


def _limit_steps(params) -> int:
    total = 0
    for p in grid(params, _limit_axes(params)):
        total += _limit_config(p, 0).total_steps
    return total


def _limit_row(name, cfg, est, target, tol, seed):
    exact = ""
    if cfg.L == 1 and cfg.k == 1 and cfg.N >= 2:
        exact = exact_m1_probability(cfg.N, cfg.steps)
    passed = abs(est.point - target) <= tol if tol is not None else True
    rc = est.regime_counts
    return {"experiment": name, "seed": seed, "engine": cfg.engine, "N": cfg.N, "L": cfg.L,
            "scale": cfg.scale, "schedule": cfg.f_schedule or "const", "k": cfg.k, "n": cfg.steps,
            "replications": est.replications, "point": est.point, "ci_low": est.ci_low,
            "ci_high": est.ci_high, "target": target, "exact": exact,
            "in_regime": int(cfg.in_regime), "B_minus": rc.get("B-", ""), "B": rc.get("B", ""),
            "B_plus": rc.get("B+", ""), "check": "pass" if passed else "fail"}


def _make_limit_runner(limit_target):
    def run(exp, params, seed, workers):
        rows = []
        tol = float(params.get("tolerance", exp.tolerance))
        for p in grid(params, _limit_axes(params)):
            cfg = _limit_config(p, seed)
            est = estimate_limit_probability(cfg, workers=workers)
            target = p_of_c(cfg.scale) if limit_target is None else limit_target
            rows.append(_limit_row(exp.name, cfg, est, target, tol, seed))
        return rows
    return run


_LIMIT_PLOT = ("scale", "point", "ci_low", "ci_high", "target")
_SWEEP_PLOT = ("N", "point", "ci_low", "ci_high", "target")


def _trend_runner(limit_target):
    """Schedule sweeps: per-row check is the trend endpoint criterion."""
    base = _make_limit_runner(limit_target)

    def run(exp, params, seed, workers):
        rows = base(exp, params, seed, workers)
        tol = float(params.get("tolerance", exp.tolerance))
        for r in rows:
            ok = r["point"] > 1 - tol if limit_target == 1.0 else r["point"] < tol
            r["check"] = "pass" if ok else "fail"
        return rows
    return run


# -- other experiments ---------------------------------------------------------

def _run_theorem16(exp, params, seed, workers):
    rows = []
    n_max = int(float(_scalar(params, "n_max")))
    lo, hi = 0.3, 1.6
    for K in _as_list(params["K"]):
        K = int(K)
        tr = theorem16_statistic(dyadic_checkpoints(n_max), K, source_for(seed, K))
        ok = lo * tr.target < tr.running_max[-1] < hi * tr.target
        for (n, s, rmax, target), low in zip(tr.rows(), tr.min_leg_max):
            rows.append({"experiment": exp.name, "seed": seed, "K": K, "n": n, "min_leg_max": int(low),
                         "statistic": s, "running_max": rmax, "target": target,
                         "check": "pass" if ok else "fail"})
    return rows


def _run_lemma31(exp, params, seed, workers):
    rows = []
    for p in grid(params, ["n", "L"]):
        n, L, paths = int(p["n"]), int(p["L"]), int(p["paths"])
        worst = 0
        violations = 0
        for r in range(paths):
            s = lemma31_sample(n, L, source_for(seed, r))
            worst = max(worst, s.max_gap)
            violations += s.max_gap > 1
        rows.append({"experiment": exp.name, "seed": seed, "n": n, "L": L, "paths": paths,
                     "violations": violations, "max_gap": worst,
                     "check": "pass" if violations == 0 else "fail"})
    return rows


def _run_lemma32(exp, params, seed, workers):
    rows = []
    for p in grid(params, ["n", "L"]):
        res = verify_lemma32(int(p["n"]), int(p["L"]), int(p["paths"]), seed)
        rows.append({"experiment": exp.name, "seed": seed, "n": res.n, "L": res.L,
                     "paths": res.replications, "violations": res.violations,
                     "frequency": res.frequency, "bound": res.bound, "slack": res.slack,
                     "threshold": res.threshold, "max_deviation": res.max_deviation,
                     "check": "pass" if res.within else "fail"})
    return rows


def _run_lemma_e(exp, params, seed, workers):
    n_max = int(float(_scalar(params, "n_max")))
    cps = dyadic_checkpoints(n_max)
    sample = chung_statistic(cps, int(_scalar(params, "paths")), seed)
    rm = sample.running_min
    rows = []
    for i, n in enumerate(cps):
        lo, med, hi = np.quantile(rm[:, i], [0.1, 0.5, 0.9])
        ok = 0.8 * sample.constant <= med <= 2.5 * sample.constant
        rows.append({"experiment": exp.name, "seed": seed, "n": int(n), "paths": rm.shape[0],
                     "running_min_q10": lo, "running_min_median": med, "running_min_q90": hi,
                     "target": sample.constant, "check": "pass" if ok else "fail"})
    return rows


def _run_erdos_renyi(exp, params, seed, workers):
    rows = []
    for p in grid(params, ["N", "x", "m"]):
        N, x, m, reps = int(p["N"]), float(p["x"]), int(p["m"]), int(p["replications"])
        balls = er_balls(N, x, m)
        exact = coverage_prob_at_least_k(N, balls, m)
        limit = er_limit(x, m)
        hits = 0
        for r in range(reps):
            hits += int(throw_balls(N, balls, source_for(seed, r)).min() >= m)
        lo, hi = wilson_ci(hits, reps) if reps else (0.0, 1.0)
        tol = float(p.get("tolerance", 0.01 if m == 1 else 0.02))
        rows.append({"experiment": exp.name, "seed": seed, "N": N, "x": x, "m": m, "balls": balls,
                     "replications": reps, "point": hits / reps if reps else "",
                     "ci_low": lo, "ci_high": hi, "exact": exact, "target": limit,
                     "check": "pass" if abs(exact - limit) < tol else "fail"})
    return rows


def _run_hoeffding(exp, params, seed, workers):
    rows = []
    for i, p in enumerate(grid(params, ["k", "x", "j_fraction"])):
        k = int(float(p["k"]))
        j = int(round(float(p["j_fraction"]) * k))
        spec = BernoulliSumSpec(k, float(p["x"]), j)
        res = hoeffding_check(spec, float(p["p"]), int(p["replications"]), source_for(seed, i))
        rows.append({"experiment": exp.name, "seed": seed, "k": k, "x": spec.x, "j": j, "p": float(p["p"]),
                     "replications": res.replications, "empirical": res.empirical, "bound": res.bound,
                     "sigma": res.sigma, "check": "pass" if res.within_bound else "fail"})
    return rows


def _run_zigzag(exp, params, seed, workers):
    rows = []
    for K in _as_list(params["K"]):
        K = int(K)
        z = zigzag(K)
        energy = dirichlet_energy(z)
        maxima = local_maxima_of_abs(z)
        out = []
        for a in _as_list(params["a"]):
            sol = minimize_segments(StrassenQuery(K, float(a)), seed=seed)
            out.append((float(a), sol))
        ok_maxima = maxima.size == K and np.allclose(maxima, 1 / (2 * K - 1), atol=1e-12)
        legs = distinct_legs_check(K, int(_scalar(params, "trials")), source_for(seed, K))
        for a, sol in out:
            ok = abs(energy - 1) <= 1e-12 and ok_maxima and sol.agreement <= 1e-9 and legs.covers_exact
            rows.append({"experiment": exp.name, "seed": seed, "K": K, "a": a, "energy": energy,
                         "abs_maxima": maxima.size, "min_energy": sol.energy,
                         "numeric_energy": sol.numeric_energy, "length_gap": sol.agreement,
                         "distinct_legs_freq": legs.frequency, "distinct_legs_exact": legs.exact,
                         "check": "pass" if ok else "fail"})
    return rows


def _sweep_steps(params):
    return _limit_steps(params)


def _theorem16_steps(params):
    return int(float(_scalar(params, "n_max"))) * len(_as_list(params["K"]))


_LIMIT_DEFAULTS = {"N": [200], "L": [1], "c": [0.5, 1, 2], "k": [1], "replications": 1000,
                   "engine": "rao-blackwell", "epsilon": 0.1}

REGISTRY: dict[str, Experiment] = {}


def _register(exp: Experiment):
    REGISTRY[exp.name] = exp


_register(Experiment(
    "theorem-a", "Climbing to height 1 on every leg within (N log N)^2 steps.",
    "P(M((N log N)^2, 1)) -> P(|Z| > 1) ~ 0.3173",
    {"N": [50, 100, 200], "c": [1], "L": [1], "k": [1], "replications": 1000, "engine": "rao-blackwell"},
    LIMIT_COLUMNS, ("N", "point", "ci_low", "ci_high", "target"), 0.05,
    _make_limit_runner(None), _limit_steps))
_register(Experiment(
    "theorem-1.1", "Climbing to height L <= N/log N on every leg within (c L N log N)^2 steps.",
    "P(M((c L N log N)^2, L)) -> p(c) = P(|Z| > 1/c)",
    dict(_LIMIT_DEFAULTS), LIMIT_COLUMNS, _LIMIT_PLOT, 0.05, _make_limit_runner(None), _limit_steps))
_register(Experiment(
    "theorem-1.2", "With a diverging factor f(N), every leg reaches height L with probability tending to 1.",
    "P(M((f(N) L N log N)^2, L)) -> 1",
    {"N": [50, 100, 200, 400], "L": [1], "k": [1], "schedule": "loglog", "replications": 1000,
     "engine": "rao-blackwell"},
    LIMIT_COLUMNS, _SWEEP_PLOT, 0.1, _trend_runner(1.0), _sweep_steps))
_register(Experiment(
    "theorem-1.3", "With a vanishing factor f(N), some leg stays below height L with probability tending to 1.",
    "P(M((f(N) L N log N)^2, L)) -> 0",
    {"N": [50, 100, 200, 400], "L": [1], "k": [1], "schedule": "inv-loglog", "replications": 1000,
     "engine": "rao-blackwell"},
    LIMIT_COLUMNS, _SWEEP_PLOT, 0.1, _trend_runner(0.0), _sweep_steps))
_register(Experiment(
    "theorem-1.4", "Visiting height L on every leg at least k times within (c L N log N)^2 steps.",
    "P(A((c L N log N)^2, L, k)) -> p(c)",
    dict(_LIMIT_DEFAULTS, k=[2]), LIMIT_COLUMNS, _LIMIT_PLOT, 0.07, _make_limit_runner(None), _limit_steps))
_register(Experiment(
    "theorem-1.5", "k visits at height L on every leg with a diverging factor f(N).",
    "P(A((f(N) L N log N)^2, L, k)) -> 1",
    {"N": [50, 100, 200, 400], "L": [1], "k": [2], "schedule": "loglog", "replications": 1000,
     "engine": "rao-blackwell"},
    LIMIT_COLUMNS, _SWEEP_PLOT, 0.1, _trend_runner(1.0), _sweep_steps))
_register(Experiment(
    "theorem-1.6", "LIL for the lowest leg maximum of a walk on K legs (trend band only).",
    "limsup min_j M_K(n,j) / sqrt(2 n log log n) = 1/(2K-1); band (0.3, 1.6) x target",
    {"K": [2, 3], "n_max": 10**8},
    ("experiment", "seed", "K", "n", "min_leg_max", "statistic", "running_max", "target", "check"),
    ("n", "statistic", "running_max", "running_max", "target"), None, _run_theorem16, _theorem16_steps))
_register(Experiment(
    "lemma-3.1", "The tall-excursion count moves by at most one between n and the completion time H(n).",
    "|zeta(L, H(n)) - zeta(L, n)| <= 1 and |xi(0, H(n)) - xi(0, n)| <= 1 on every path",
    {"n": [1000, 10000], "L": [1, 4, 16], "paths": 10000},
    ("experiment", "seed", "n", "L", "paths", "violations", "max_gap", "check"),
    ("n", "max_gap", "max_gap", "max_gap", "max_gap"), 0,
    _run_lemma31, lambda p: sum(int(g["n"]) * int(g["paths"]) for g in grid(p, ["n", "L"]))))
_register(Experiment(
    "lemma-3.2", "Tall-excursion count against local time at 0 divided by L.",
    "P(|zeta(L,n) - xi(0,n)/L| >= 4 n^(1/4) (log n)^(3/4)) <= 2/n",
    {"n": [2**14, 2**16, 2**18], "L": [2, 8], "paths": 1000},
    ("experiment", "seed", "n", "L", "paths", "violations", "frequency", "bound", "slack",
     "threshold", "max_deviation", "check"),
    ("n", "frequency", "frequency", "frequency", "bound"), None,
    _run_lemma32, lambda p: sum(int(g["n"]) * int(g["paths"]) for g in grid(p, ["n", "L"]))))
_register(Experiment(
    "lemma-e", "Chung's liminf for the running maximum of |S| (band check only).",
    "liminf (log log n / n)^(1/2) max_{k<=n} |S_k| = pi/sqrt(8) ~ 1.1107",
    {"n_max": 2**24, "paths": 200},
    ("experiment", "seed", "n", "paths", "running_min_q10", "running_min_median",
     "running_min_q90", "target", "check"),
    ("n", "running_min_median", "running_min_q10", "running_min_q90", "target"), None,
    _run_lemma_e, lambda p: int(float(_scalar(p, "n_max"))) * int(_scalar(p, "paths"))))
_register(Experiment(
    "erdos-renyi", "Every one of N urns holds at least m of N log N + (m-1) N log log N + N x balls.",
    "P -> exp(-exp(-x)/(m-1)!)",
    {"N": [10000], "x": [-1, 0, 1, 2], "m": [1, 2], "replications": 200},
    ("experiment", "seed", "N", "x", "m", "balls", "replications", "point", "ci_low", "ci_high",
     "exact", "target", "check"),
    ("x", "exact", "ci_low", "ci_high", "target"), 0.01, _run_erdos_renyi))
_register(Experiment(
    "hoeffding", "Deviation of a Bernoulli sum of j <= k summands.",
    "P(|S_j - j p| >= k x) <= 2 exp(-2 k x^2)",
    {"k": [100, 1000, 10000], "x": [0.05, 0.1, 0.2], "j_fraction": [1, 0.5], "p": 0.5,
     "replications": 20000},
    ("experiment", "seed", "k", "x", "j", "p", "replications", "empirical", "bound", "sigma", "check"),
    ("k", "empirical", "empirical", "empirical", "bound"), None, _run_hoeffding))
_register(Experiment(
    "strassen-zigzag", "Zigzag extremal of the Strassen class with K peaks and the segment minimisation.",
    "I(zigzag(K)) = 1, K peaks of height 1/(2K-1); min alpha^2 sum 1/x_i = alpha^2 (2K-1)^2 / a",
    {"K": list(range(1, 11)), "a": [0.5, 1], "trials": 100000},
    ("experiment", "seed", "K", "a", "energy", "abs_maxima", "min_energy", "numeric_energy",
     "length_gap", "distinct_legs_freq", "distinct_legs_exact", "check"),
    ("K", "energy", "energy", "energy", "min_energy"), 1e-12, _run_zigzag))


def schedules() -> list[str]:
    return sorted(SCHEDULES)


def resolve(name: str) -> Experiment:
    try:
        return REGISTRY[name]
    except KeyError:
        raise InvalidConfigurationError(
            f"unknown experiment {name!r}; choose from {', '.join(REGISTRY)}") from None


def with_defaults(name: str, params: dict) -> dict:
    merged = dict(resolve(name).defaults)
    merged.update(params)
    return merged


def planned_steps(name: str, params: dict) -> int:
    return int(resolve(name).steps(with_defaults(name, params)))


def run_experiment(name: str, params: dict, seed: int, workers: int = 1) -> list[dict]:
    exp = resolve(name)
    return exp.runner(exp, with_defaults(name, params), seed, workers)


