"""Run-manifest parsing and emission.

A manifest is a TOML document with four tables::

    [experiment]          # ExperimentConfig fields (kind, n_dm, phi, shots, ...)
    [noise]               # epsilon, error_classes, role_scope, exclusive,
                          # delay_relaxation, and an optional [noise.overrides]
                          # table of NoiseProfile fields
    [sweep]               # repetitions, and [sweep.axes]: name -> list of values
    [output]              # path, format (csv|jsonl), master_seed, jobs

Unknown keys anywhere are rejected by name. Sweep axes may name any
experiment or noise field, plus two shorthands: ``n_sensors`` (split evenly
into ``n_s``/``n_f`` for the radar, ``n_dm`` otherwise) and ``noise`` (a named
preset from :data:`qsensim.noise.PRESETS`).
"""
from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .experiments import ExperimentConfig
from .noise import ERROR_CLASSES, PRESETS, NoiseProfile

NOISE_KEYS = ("epsilon", "error_classes", "role_scope", "exclusive", "delay_relaxation")
_EXP_FIELDS = {f.name: f for f in fields(ExperimentConfig)}
EXPERIMENT_KEYS = tuple(k for k in _EXP_FIELDS if k not in NOISE_KEYS + ("profile_overrides", "seed"))
OUTPUT_KEYS = ("path", "format", "master_seed", "jobs")
SWEEP_KEYS = ("repetitions", "axes")
SPECIAL_AXES = ("n_sensors", "noise")
FORMATS = ("csv", "jsonl")
_PROFILE_KEYS = tuple(f.name for f in fields(NoiseProfile) if f.name != "platform")


class ConfigError(ValueError):
    """Invalid manifest; the message names the offending section and key."""


@dataclass(frozen=True)
class RunManifest:
    base: ExperimentConfig
    axes: tuple[tuple[str, tuple], ...] = ()
    repetitions: int = 1
    output_path: str | None = None
    format: str = "csv"
    master_seed: int = 0
    jobs: int = 1
    config_path: str | None = field(default=None, compare=False)

    @property
    def n_points(self) -> int:
        return math.prod(len(v) for _, v in self.axes) if self.axes else 1


def _reject_unknown(section: str, table: dict, allowed) -> None:
    for k in table:
        if k not in allowed:
            raise ConfigError(f"[{section}] unknown key {k!r}; allowed: {', '.join(allowed)}")


def _table(doc: dict, name: str) -> dict:
    t = doc.get(name, {})
    if not isinstance(t, dict):
        raise ConfigError(f"[{name}] must be a table")
    return t


def _coerce(section: str, key: str, value):
    """Type-check one experiment/noise field against the dataclass default."""
    default = _EXP_FIELDS[key].default if key in _EXP_FIELDS else None
    if key in ("error_classes", "role_scope"):
        if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
            raise ConfigError(f"[{section}] {key} must be a list of strings")
        return tuple(value)
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"[{section}] {key} must be true or false")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"[{section}] {key} must be an integer")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"[{section}] {key} must be a number")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"[{section}] {key} must be a string")
        return value
    return value


def _overrides(table: dict) -> dict:
    _reject_unknown("noise.overrides", table, _PROFILE_KEYS)
    out = {}
    for k, v in table.items():
        if k == "durations":
            if not isinstance(v, dict):
                raise ConfigError("[noise.overrides] durations must be a table")
            _reject_unknown("noise.overrides.durations", v, ("single_gate", "two_gate", "readout"))
            out[k] = {dk: float(dv) for dk, dv in v.items()}
        elif k == "me":
            out[k] = tuple(float(x) for x in v) if isinstance(v, list) else (float(v), float(v))
        else:
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ConfigError(f"[noise.overrides] {k} must be a number")
            out[k] = float(v)
    return out


def apply_axis(cfg: ExperimentConfig, name: str, value) -> ExperimentConfig:
    """Return ``cfg`` with one sweep coordinate applied."""
    if name == "noise":
        if value not in PRESETS:
            raise ValueError(f"unknown noise preset {value!r}")
        eps, classes = PRESETS[value]
        return cfg.replace(epsilon=eps, error_classes=tuple(classes), exclusive=False)
    if name == "n_sensors":
        src = cfg.swap_of if cfg.kind == "swap_test" else cfg.kind
        if src == "radar":
            if value % 2:
                raise ValueError(f"radar sensor count {value} must be even (n_s = n_f)")
            return cfg.replace(n_s=value // 2, n_f=value // 2)
        return cfg.replace(n_dm=value)
    return cfg.replace(**{name: _coerce("sweep.axes", name, value)})


def parse_document(doc: dict, config_path: str | None = None) -> RunManifest:
    _reject_unknown("top level", doc, ("experiment", "noise", "sweep", "output"))
    exp = _table(doc, "experiment")
    noise = _table(doc, "noise")
    sweep = _table(doc, "sweep")
    out = _table(doc, "output")
    _reject_unknown("experiment", exp, EXPERIMENT_KEYS)
    _reject_unknown("noise", noise, NOISE_KEYS + ("overrides",))
    _reject_unknown("sweep", sweep, SWEEP_KEYS)
    _reject_unknown("output", out, OUTPUT_KEYS)
    if "kind" not in exp:
        raise ConfigError("[experiment] kind is required")

    kw: dict[str, Any] = {k: _coerce("experiment", k, v) for k, v in exp.items()}
    for k, v in noise.items():
        if k == "overrides":
            kw["profile_overrides"] = _overrides(v)
        else:
            kw[k] = _coerce("noise", k, v)
    if "epsilon" in kw and not 0 <= kw["epsilon"] <= 1:
        raise ConfigError(f"[noise] epsilon={kw['epsilon']} outside the range [0, 1]")
    try:
        base = ExperimentConfig(**kw)
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e)) from e

    axes_t = sweep.get("axes", {})
    if not isinstance(axes_t, dict):
        raise ConfigError("[sweep] axes must be a table")
    allowed_axes = EXPERIMENT_KEYS + NOISE_KEYS + SPECIAL_AXES
    _reject_unknown("sweep.axes", axes_t, allowed_axes)
    axes = []
    for name, vals in axes_t.items():
        if not isinstance(vals, list) or not vals:
            raise ConfigError(f"[sweep.axes] {name} must be a non-empty list")
        if name == "noise":
            bad = [v for v in vals if v not in PRESETS]
            if bad:
                raise ConfigError(f"[sweep.axes] unknown noise preset(s) {bad}; choose from {sorted(PRESETS)}")
        if name == "epsilon":
            bad = [v for v in vals if not (isinstance(v, (int, float)) and 0 <= v <= 1)]
            if bad:
                raise ConfigError(f"[sweep.axes] epsilon value(s) {bad} outside the range [0, 1]")
        axes.append((name, tuple(tuple(v) if isinstance(v, list) else v for v in vals)))

    reps = sweep.get("repetitions", 1)
    if isinstance(reps, bool) or not isinstance(reps, int) or reps < 1:
        raise ConfigError("[sweep] repetitions must be a positive integer")
    fmt = out.get("format", "csv")
    if fmt not in FORMATS:
        raise ConfigError(f"[output] format must be one of {FORMATS}, got {fmt!r}")
    seed = out.get("master_seed", 0)
    jobs = out.get("jobs", 1)
    for name, v in (("master_seed", seed), ("jobs", jobs)):
        if isinstance(v, bool) or not isinstance(v, int):
            raise ConfigError(f"[output] {name} must be an integer")
    if jobs < 1:
        raise ConfigError("[output] jobs must be at least 1")
    path = out.get("path")
    if path is not None and not isinstance(path, str):
        raise ConfigError("[output] path must be a string")

    try:
        # full validation only when nothing is swept; swept points are checked
        # one by one at execution time so a bad point does not sink the rest
        if axes:
            base.validate(domain=False)
        else:
            base.validate()
    except ValueError as e:
        raise ConfigError(f"[experiment] {e}") from e
    return RunManifest(base, tuple(axes), reps, path, fmt, seed, jobs, config_path)


def parse_text(text: str, config_path: str | None = None) -> RunManifest:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        where = config_path or "<config>"
        raise ConfigError(f"{where}: {e}") from e
    return parse_document(doc, config_path)


def parse_config(path) -> tuple[ExperimentConfig, RunManifest]:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file {str(p)!r} not found")
    m = parse_text(p.read_text(), str(p))
    return m.base, m


# ---------------------------------------------------------------- emission

def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        if math.isnan(v):
            return "nan"
        return repr(v)
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    raise TypeError(f"cannot write {type(v).__name__} to TOML")


def dump_manifest(m: RunManifest) -> str:
    """Effective manifest with every default written out."""
    c = m.base
    lines = ["[experiment]"]
    for k in EXPERIMENT_KEYS:
        lines.append(f"{k} = {_fmt(getattr(c, k))}")
    lines += ["", "[noise]"]
    for k in NOISE_KEYS:
        lines.append(f"{k} = {_fmt(getattr(c, k))}")
    ov = dict(c.profile_overrides)
    durations = ov.pop("durations", None)
    if ov or durations:
        lines += ["", "[noise.overrides]"]
        lines += [f"{k} = {_fmt(v)}" for k, v in ov.items()]
        if durations:
            lines += ["", "[noise.overrides.durations]"]
            lines += [f"{k} = {_fmt(v)}" for k, v in durations.items()]
    lines += ["", "[sweep]", f"repetitions = {m.repetitions}"]
    if m.axes:
        lines += ["", "[sweep.axes]"]
        lines += [f"{name} = {_fmt(list(vals))}" for name, vals in m.axes]
    lines += ["", "[output]"]
    if m.output_path is not None:
        lines.append(f"path = {_fmt(m.output_path)}")
    lines += [f"format = {_fmt(m.format)}", f"master_seed = {m.master_seed}", f"jobs = {m.jobs}"]
    return "\n".join(lines) + "\n"


__all__ = [
    "ConfigError",
    "RunManifest",
    "parse_config",
    "parse_text",
    "parse_document",
    "dump_manifest",
    "apply_axis",
    "ERROR_CLASSES",
]
