"""Experiment configuration: one YAML/JSON document, schema-checked before any work."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import yaml

from privload.errors import DomainError
from privload.evaluation import DEFAULT_LAMBDAS, UTILITY_LIMIT_KW, SweepConfig
from privload.forecasting import METHODS
from privload.ingest import sensitivity_catalog
from privload.privacy import DEFAULT_DELTA_TILDE

DATA_DIR_ENV = "PRIVLOAD_DATA_DIR"

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["data", "seeds"],
    "properties": {
        "data": {
            "type": "object",
            "additionalProperties": False,
            "required": ["loads", "temperatures"],
            "properties": {"loads": {"type": "string"}, "temperatures": {"type": "string"}},
        },
        "methods": {"type": "array", "minItems": 1, "items": {"enum": list(METHODS)}},
        "lambdas": {"type": "array", "minItems": 1, "items": {"type": "number", "minimum": 0}},
        "delta_fs": {"type": "array", "minItems": 1,
                     "items": {"type": "number", "exclusiveMinimum": 0}},
        "seeds": {"type": "array", "minItems": 1, "items": {"type": "integer", "minimum": 0}},
        "k": {"type": ["integer", "null"], "minimum": 1},
        "delta": {"type": "number", "minimum": 0, "maximum": 1},
        "delta_tilde": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "horizon": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "hours": {"type": "integer", "minimum": 1},
                "start": {"type": ["string", "null"]},
            },
        },
        "temperature": {"enum": ["forecast", "observed"]},
        "utility_limit_kw": {"type": ["number", "null"]},
        "jobs": {"type": "integer", "minimum": 1},
        "output": {"type": "string"},
    },
}


class ConfigError(DomainError):
    pass


@dataclass
class ExperimentConfig:
    loads: Path
    temperatures: Path
    sweep: SweepConfig
    output: Path | None = None
    source: Path | None = field(default=None, repr=False)


def resolve_data_path(raw: str, base: Path | None = None) -> Path:
    """Relative paths try ``base`` (config dir / cwd) first, then $PRIVLOAD_DATA_DIR."""
    path = Path(raw).expanduser()
    if path.is_absolute():
        return path
    first = (base or Path.cwd()) / path
    if first.exists():
        return first
    data_dir = os.environ.get(DATA_DIR_ENV)
    if data_dir:
        candidate = Path(data_dir) / path
        if candidate.exists():
            return candidate
    return first


def load_config(path, overrides: dict | None = None) -> ExperimentConfig:
    """Parse, apply CLI overrides, validate, and build the experiment config."""
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML/JSON: {exc}") from None
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key in ("horizon_hours", "horizon_start"):
            doc.setdefault("horizon", {})["hours" if key == "horizon_hours" else "start"] = value
        else:
            doc[key] = value
    try:
        jsonschema.validate(doc, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{path}: {where}: {exc.message}") from None

    horizon = doc.get("horizon", {})
    sweep = SweepConfig(
        lambdas=doc.get("lambdas", list(DEFAULT_LAMBDAS)),
        delta_fs=doc.get("delta_fs", sensitivity_catalog().values),
        methods=doc.get("methods", ["benchmark"]),
        seeds=doc["seeds"],
        horizon_hours=horizon.get("hours", 168),
        horizon_start=horizon.get("start"),
        k=doc.get("k"),
        delta=doc.get("delta", 0.0),
        delta_tilde=doc.get("delta_tilde", DEFAULT_DELTA_TILDE),
        temperature_mode=doc.get("temperature", "forecast"),
        utility_limit_kw=doc.get("utility_limit_kw", UTILITY_LIMIT_KW),
        jobs=doc.get("jobs", os.cpu_count() or 1),
    )
    base = path.parent
    out = doc.get("output")
    return ExperimentConfig(
        loads=resolve_data_path(doc["data"]["loads"], base),
        temperatures=resolve_data_path(doc["data"]["temperatures"], base),
        sweep=sweep,
        output=(base / out) if out and not Path(out).is_absolute() else (Path(out) if out else None),
        source=path,
    )
