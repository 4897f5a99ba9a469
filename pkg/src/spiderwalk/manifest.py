"""Experiment manifests: INI files with one section per experiment.

Grammar::

    [run]                       ; optional, settings shared by all sections
    seed = 7
    workers = 2
    output_dir = results

    [theorem-1.1]               ; a registry name ...
    N = 200
    c = 0.5, 1, 2               ; comma-separated values form a grid axis

    [theorem-1.1:large]         ; ... optionally followed by ':label'
    N = 1000

Values are parsed as int, then float, then kept as strings.  A section may
override ``seed``.  ``;`` and ``#`` start comments.
"""
from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field
from pathlib import Path

from .errors import InvalidConfigurationError
from .experiments import REGISTRY

RUN_KEYS = {"seed", "workers", "output_dir"}


class ManifestError(InvalidConfigurationError):
    def __init__(self, message, path=None, line=None):
        where = f"{path}:{line}: " if path and line else (f"{path}: " if path else "")
        super().__init__(where + message)
        self.path = path
        self.line = line


@dataclass(frozen=True)
class ManifestSection:
    label: str
    experiment: str
    params: dict
    seed: int


@dataclass(frozen=True)
class Manifest:
    path: str
    seed: int
    workers: int | None
    output_dir: str | None
    sections: tuple = field(default_factory=tuple)
    text: str = ""


def parse_value(raw: str):
    parts = [p.strip() for p in raw.split(",")]
    vals = [_scalar(p) for p in parts if p != ""]
    if not vals:
        raise ValueError("empty value")
    return vals if len(vals) > 1 else vals[0]


def _scalar(text: str):
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    if re.fullmatch(r"[0-9.eE+-]+", text):
        raise ValueError(f"malformed number {text!r}")
    return text


def _line_of(text: str, section: str, key: str | None = None) -> int | None:
    in_section = False
    for no, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if s.startswith("["):
            in_section = s == f"[{section}]"
            if in_section and key is None:
                return no
            continue
        if in_section and key is not None and re.match(rf"{re.escape(key)}\s*[=:]", s, re.IGNORECASE):
            return no
    return None


def _int(value, what, path, line):
    if isinstance(value, int) and not isinstance(value, bool):
        return value
    raise ManifestError(f"{what} must be an integer, got {value!r}", path, line)


def parse_manifest_text(text: str, path: str = "<manifest>") -> Manifest:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text, source=path)
    except configparser.ParsingError as exc:
        line = exc.errors[0][0] if exc.errors else None
        raise ManifestError("could not parse line", path, line) from None
    except configparser.DuplicateSectionError as exc:
        raise ManifestError(f"duplicate section [{exc.section}]", path, exc.lineno) from None
    except configparser.DuplicateOptionError as exc:
        raise ManifestError(f"duplicate key {exc.option!r} in [{exc.section}]", path, exc.lineno) from None
    except configparser.MissingSectionHeaderError as exc:
        raise ManifestError("content before the first [section] header", path, exc.lineno) from None

    seed, workers, output_dir = 0, None, None
    if cp.has_section("run"):
        for key, raw in cp.items("run"):
            line = _line_of(text, "run", key)
            if key not in RUN_KEYS:
                raise ManifestError(f"unknown key {key!r} in [run]; allowed: {', '.join(sorted(RUN_KEYS))}",
                                    path, line)
            if key == "output_dir":
                output_dir = raw.strip()
                continue
            try:
                val = parse_value(raw)
            except ValueError as exc:
                raise ManifestError(str(exc), path, line) from None
            if key == "seed":
                seed = _int(val, "seed", path, line)
            else:
                workers = _int(val, "workers", path, line)

    sections = []
    for label in cp.sections():
        if label == "run":
            continue
        name = label.split(":", 1)[0].strip()
        if name not in REGISTRY:
            raise ManifestError(f"unknown experiment {name!r}; choose from {', '.join(REGISTRY)}",
                                path, _line_of(text, label))
        allowed = set(REGISTRY[name].defaults) | {"seed", "tolerance"}
        params = {}
        sec_seed = seed
        for key, raw in cp.items(label):
            line = _line_of(text, label, key)
            if key not in allowed:
                raise ManifestError(f"unknown parameter {key!r} for {name}; allowed: {', '.join(sorted(allowed))}",
                                    path, line)
            try:
                val = parse_value(raw)
            except ValueError as exc:
                raise ManifestError(str(exc), path, line) from None
            if key == "seed":
                sec_seed = _int(val, "seed", path, line)
            else:
                params[key] = val
        if not 0 <= sec_seed < 2**64:
            raise ManifestError("seed must fit in 64 bits", path, _line_of(text, label, "seed"))
        sections.append(ManifestSection(label, name, params, sec_seed))
    if not sections:
        raise ManifestError("manifest defines no experiments", path, None)
    return Manifest(path, seed, workers, output_dir, tuple(sections), text)


def load_manifest(path) -> Manifest:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ManifestError(f"cannot read manifest: {exc.strerror}", str(p)) from None
    return parse_manifest_text(text, str(p))
