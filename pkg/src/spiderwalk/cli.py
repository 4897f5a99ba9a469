"""Command line entry point: ``spiderwalk run|describe|emit-plot-data|list``."""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import platform
import sys
import time
from importlib import metadata
from pathlib import Path

import numpy as np

from .errors import InvalidArgumentError, InvalidConfigurationError, ResourceBudgetError
from .experiments import REGISTRY, planned_steps, resolve, run_experiment
from .manifest import load_manifest, parse_value
from .rng import ALGORITHM

EXIT_OK, EXIT_CONFIG, EXIT_RESOURCE, EXIT_CHECK = 0, 2, 3, 4
OUTPUT_ENV = "SPIDERWALK_OUTPUT_DIR"
CONFIRM_STEPS = 10**10
MAX_STEPS = 10**11

SERIES_COLUMN = {"theorem-1.6": "K", "theorem-1.1": "k", "theorem-1.4": "k", "lemma-3.2": "L",
                 "lemma-3.1": "L", "erdos-renyi": "m", "hoeffding": "x", "strassen-zigzag": "a",
                 "theorem-1.2": "k", "theorem-1.3": "k", "theorem-1.5": "k", "theorem-a": "k"}


def code_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


def format_cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".12g")
    return str(v)


def write_csv(path: Path, columns, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([format_cell(r.get(c, "")) for c in columns])
    path.write_text(buf.getvalue(), encoding="utf-8")


def _parse_overrides(overrides) -> dict:
    out = {}
    for item in overrides or ():
        key, sep, raw = item.partition("=")
        if not sep or not key.strip():
            raise InvalidConfigurationError(f"--set expects key=value, got {item!r}")
        try:
            out[key.strip()] = parse_value(raw)
        except ValueError as exc:
            raise InvalidConfigurationError(f"--set {key.strip()}: {exc}") from None
    return out


def _accepts(experiment: str, key: str) -> bool:
    return key in REGISTRY[experiment].defaults or key == "tolerance"


def _confirm(total: int, assume_yes: bool) -> bool:
    print(f"planned walk steps: {total:.3e}", file=sys.stderr)
    if total <= CONFIRM_STEPS or assume_yes:
        return True
    if not sys.stdin.isatty():
        print(f"more than {CONFIRM_STEPS:.0e} steps: pass --yes to proceed", file=sys.stderr)
        return False
    answer = input("proceed? [y/N] ").strip().lower()
    return answer in ("y", "yes")


def cmd_run(args) -> int:
    man = load_manifest(args.manifest)
    out_dir = Path(args.output_dir or man.output_dir or os.environ.get(OUTPUT_ENV) or "spiderwalk-output")
    workers = args.workers or man.workers or os.cpu_count() or 1
    overrides = _parse_overrides(args.set)
    for key in overrides:
        if not any(_accepts(sec.experiment, key) for sec in man.sections):
            raise InvalidConfigurationError(f"--set {key}: no experiment in the manifest takes this parameter")
    plan = []
    for sec in man.sections:
        params = dict(sec.params)
        params.update({k: v for k, v in overrides.items() if _accepts(sec.experiment, k)})
        seed = args.seed if args.seed is not None else sec.seed
        plan.append((sec, params, seed, planned_steps(sec.experiment, params)))
    total = sum(p[3] for p in plan)
    if total > MAX_STEPS:
        raise ResourceBudgetError(f"manifest needs {total:.3e} walk steps; the limit is {MAX_STEPS:.0e}",
                                  required=total, budget=MAX_STEPS)
    if not _confirm(total, args.yes):
        return EXIT_RESOURCE

    out_dir.mkdir(parents=True, exist_ok=True)
    started = time.time()
    outputs, failures = [], []
    for sec, params, seed, steps in plan:
        t0 = time.time()
        rows = run_experiment(sec.experiment, params, seed, workers)
        exp = resolve(sec.experiment)
        target = out_dir / (sec.label.replace(":", "_") + ".csv")
        write_csv(target, exp.columns, rows)
        failed = [r for r in rows if r.get("check") == "fail"]
        failures.extend((sec.label, r) for r in failed)
        outputs.append({"section": sec.label, "experiment": sec.experiment, "csv": str(target),
                        "rows": len(rows), "seed": seed, "planned_steps": steps,
                        "failed_checks": len(failed), "seconds": round(time.time() - t0, 3),
                        "params": {k: v for k, v in params.items()}})
        print(f"{sec.label}: {len(rows)} rows -> {target}" + (f" ({len(failed)} failed checks)" if failed else ""))
    meta = {"manifest": str(man.path), "manifest_text": man.text, "seed_override": args.seed,
            "workers": workers, "code_version": code_version(), "rng": ALGORITHM,
            "python": platform.python_version(), "numpy": np.__version__,
            "wall_time_seconds": round(time.time() - started, 3), "outputs": outputs}
    (out_dir / "run-metadata.json").write_text(json.dumps(meta, indent=2, default=str) + "\n", encoding="utf-8")
    if args.check and failures:
        for label, r in failures:
            print(f"check failed in {label}: " + ", ".join(f"{k}={format_cell(v)}" for k, v in r.items()),
                  file=sys.stderr)
        return EXIT_CHECK
    return EXIT_OK


def cmd_describe(args) -> int:
    print(resolve(args.name).describe())
    return EXIT_OK


def cmd_list(args) -> int:
    width = max(len(n) for n in REGISTRY)
    for name, exp in REGISTRY.items():
        print(f"{name:<{width}}  {exp.statement}")
    return EXIT_OK


def emit_plot_data(csv_path, experiment: str | None = None, output=None) -> Path:
    """Write ``x, estimate, ci_low, ci_high, target`` (plus ``series``) next to the CSV."""
    src = Path(csv_path)
    try:
        text = src.read_text(encoding="utf-8")
    except OSError as exc:
        raise InvalidArgumentError(f"cannot read {src}: {exc.strerror}") from None
    reader = csv.DictReader(io.StringIO(text))
    header = reader.fieldnames or []
    rows = list(reader)
    if experiment is None:
        names = {r["experiment"] for r in rows if "experiment" in r}
        if len(names) != 1:
            raise InvalidArgumentError("cannot infer the experiment from the CSV; pass --experiment")
        experiment = names.pop()
    exp = resolve(experiment)
    missing = [c for c in exp.columns if c not in header]
    extra = [c for c in header if c not in exp.columns]
    if missing or extra:
        raise InvalidConfigurationError(
            f"CSV columns do not match {experiment}: missing {missing or 'none'}, unexpected {extra or 'none'}")
    if not rows:
        print(f"warning: {src} has no data rows; writing an empty series", file=sys.stderr)
    xcol, ycol, lo, hi, tcol = exp.plot
    series = SERIES_COLUMN.get(experiment)
    dest = Path(output) if output else src.with_suffix(".plot.csv")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["series", "x", "estimate", "ci_low", "ci_high", "target"])
    for r in rows:
        label = f"{series}={r[series]}" if series else ""
        w.writerow([label, r[xcol], r[ycol], r[lo], r[hi], r[tcol]])
    dest.write_text(buf.getvalue(), encoding="utf-8")
    return dest


def cmd_emit(args) -> int:
    dest = emit_plot_data(args.csv, args.experiment, args.output)
    print(dest)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="spiderwalk", description="Random walks on spiders: batch experiments.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run every experiment in a manifest")
    r.add_argument("manifest")
    r.add_argument("--seed", type=int, help="override the seed of every section")
    r.add_argument("--workers", type=int, help="worker processes (default: CPU count)")
    r.add_argument("--output-dir", help=f"output directory (default: manifest, then ${OUTPUT_ENV})")
    r.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a parameter in every section that takes it")
    r.add_argument("--check", action="store_true", help="exit with status 4 when an acceptance check fails")
    r.add_argument("--yes", action="store_true", help="skip the confirmation for very large runs")
    r.set_defaults(func=cmd_run)

    d = sub.add_parser("describe", help="explain an experiment")
    d.add_argument("name")
    d.set_defaults(func=cmd_describe)

    e = sub.add_parser("emit-plot-data", help="turn a result CSV into plot-ready series")
    e.add_argument("csv")
    e.add_argument("--experiment")
    e.add_argument("--output")
    e.set_defaults(func=cmd_emit)

    ls = sub.add_parser("list", help="list registered experiments")
    ls.set_defaults(func=cmd_list)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ResourceBudgetError as exc:
        print(f"resource error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (InvalidConfigurationError, InvalidArgumentError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
