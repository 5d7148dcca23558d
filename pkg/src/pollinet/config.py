"""Run configuration: a JSON document checked against :data:`CONFIG_SCHEMA`.

Command-line flags are merged on top of the file before validation, and the
merged document is what every run writes next to its results.
"""

from __future__ import annotations

import copy
import json
import re
from pathlib import Path

import jsonschema

from .errors import ConfigError
from .network import graphon_from_dict, harvest_from_dict
from .rates import RATE_FIELDS, RateParams, kernel_from_dict

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_density = {"oneOf": [{"type": "number", "minimum": 0},
                      {"type": "array", "items": {"type": "number", "minimum": 0}}]}
_kernel = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["constant", "tabulated"]},
        "value": {"type": "number", "minimum": 0},
        "grid": {"type": "array", "items": {"type": "array", "items": {"type": "number"}}},
    },
    "additionalProperties": False,
}
_traits = {"oneOf": [
    {"const": "uniform"},
    {"type": "object", "required": ["kind", "exponent"],
     "properties": {"kind": {"const": "power"}, "exponent": _pos}, "additionalProperties": False},
    {"type": "object", "required": ["kind", "a", "b"],
     "properties": {"kind": {"const": "beta"}, "a": _pos, "b": _pos}, "additionalProperties": False},
]}
_times = {"type": "array", "items": {"type": "number", "minimum": 0}}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "pollinet run configuration",
    "type": "object",
    "properties": {
        "seed": {"type": "integer", "minimum": 0},
        "out": {"type": "string"},
        "community": {
            "type": "object",
            "required": ["graphon", "harvest"],
            "properties": {
                "n": {"type": "integer", "minimum": 1},
                "m": {"type": "integer", "minimum": 1},
                "graphon": {"type": "object", "required": ["kind"]},
                "harvest": {"type": "object", "required": ["kind"]},
                "plantTraits": _traits,
                "pollinatorTraits": _traits,
            },
            "additionalProperties": False,
        },
        "rates": {
            "type": "object",
            "required": list(RATE_FIELDS),
            "properties": {f: _pos for f in RATE_FIELDS},
            "additionalProperties": False,
        },
        "kernels": {
            "type": "object",
            "properties": {"plants": _kernel, "pollinators": _kernel},
            "additionalProperties": False,
        },
        "scale": {
            "type": "object",
            "properties": {"K": {"type": "integer", "minimum": 1},
                           "N": {"type": "integer", "minimum": 1}},
            "additionalProperties": False,
        },
        "initial": {
            "type": "object",
            "properties": {"plants": _density, "pollinators": _density,
                           "random": {"type": "object",
                                      "properties": {"low": _num, "high": _num},
                                      "additionalProperties": False}},
            "additionalProperties": False,
        },
        "schedule": {
            "type": "object",
            "properties": {
                "tEnd": _pos,
                "recordTimes": _times,
                "recordEvery": _pos,
                "replicas": {"type": "integer", "minimum": 1},
                "maxEvents": {"type": "integer", "minimum": 1},
                "dt": _pos,
                "paths": {"type": "integer", "minimum": 2},
            },
            "additionalProperties": False,
        },
        "pair": {
            "type": "object",
            "properties": {"c": _pos, "k": _pos, "h": _pos,
                           "basinResolution": {"type": "integer", "minimum": 2}},
            "additionalProperties": False,
        },
        "study": {
            "type": "object",
            "properties": {
                "K": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
                "nValues": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
                "seeds": {"type": "integer", "minimum": 1},
                "times": _times,
            },
            "additionalProperties": False,
        },
        "plots": {"type": "boolean"},
    },
    "required": ["rates"],
    "additionalProperties": False,
}

DEFAULTS = {
    "seed": 0,
    "out": "out",
    "kernels": {"plants": {"kind": "constant", "value": 1.0},
                "pollinators": {"kind": "constant", "value": 1.0}},
    "scale": {"K": 1000, "N": 100},
    "initial": {"plants": 1.0, "pollinators": 1.0},
    "schedule": {"tEnd": 10.0, "recordEvery": 0.1, "replicas": 1, "maxEvents": 100_000_000,
                 "dt": 1e-3, "paths": 2000},
    "pair": {"c": 1.0, "k": 1.0, "h": 1.0, "basinResolution": 25},
    "study": {"K": [100, 400, 1600], "nValues": [50, 100, 200], "seeds": 20, "times": [0.0, 5.0]},
    "plots": True,
}


def _merge(base, over):
    out = copy.deepcopy(base)
    for key, val in over.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def _line_of(text, path):
    """Best-effort 1-based line of the JSON key at ``path`` (a list of keys)."""
    if not text:
        return None
    pos, line = 0, None
    for key in path:
        if not isinstance(key, str):
            continue
        m = re.compile(r'"%s"\s*:' % re.escape(key)).search(text, pos)
        if m is None:
            break
        pos = m.end()
        line = text.count("\n", 0, m.start()) + 1
    return line


def validate(cfg: dict, text: str | None = None, source="<config>"):
    """Check ``cfg`` against the schema and the domain constructors.

    Raises :class:`ConfigError` naming the offending field, with the line in
    ``text`` where it was found when the source text is available.
    """
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        path = [str(p) for p in err.absolute_path]
        if err.validator == "required":
            missing = re.match(r"'([^']+)'", err.message)
            field = ".".join(path + [missing.group(1) if missing else "?"])
            msg = f"missing required field `{field}`"
        else:
            field = ".".join(path) or "<root>"
            msg = f"invalid field `{field}`: {err.message}"
        line = _line_of(text, path) or (_line_of(text, path[:-1]) if path else None)
        where = f"{source}:{line}: " if line else f"{source}: "
        raise ConfigError(where + msg)
    # semantic checks delegated to the constructors
    try:
        RateParams.from_dict(cfg["rates"])
        for side in ("plants", "pollinators"):
            kernel_from_dict(cfg["kernels"][side])
        if "community" in cfg:
            graphon_from_dict(cfg["community"]["graphon"])
            harvest_from_dict(cfg["community"]["harvest"])
    except (ConfigError, ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    return cfg


def parse(text: str, source="<config>", overrides=None):
    """Parse, merge defaults and ``overrides`` (a nested dict), and validate."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{source}:1: top level must be an object")
    cfg = validate(_merge(DEFAULTS, raw), text, source)
    if overrides:
        cfg = validate(_merge(cfg, overrides), None, f"{source} (after command-line overrides)")
    return cfg


def load(path, overrides=None):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse(text, str(path), overrides)


def write_resolved(cfg, out_dir):
    """Write the merged configuration as ``config.resolved.json`` in ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "config.resolved.json"
    path.write_text(json.dumps(cfg, indent=2, sort_keys=True) + "\n")
    return path
