"""Run configuration: TOML in, validated and defaulted, TOML out.

Every default is filled in before a run starts. The resolved configuration is
then written next to the report, so each report describes itself.
"""
from __future__ import annotations

import copy
import hashlib
import json
import re
from pathlib import Path

import jsonschema
import tomli
import tomli_w

from ..errors import ConfigError

EXPERIMENTS = ("evolve", "criteria", "fkpp", "tauberian", "verify")

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_grid = {"type": "array", "items": _pos, "minItems": 1}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["experiment"],
    "properties": {
        "experiment": {"enum": list(EXPERIMENTS)},
        "seed": {"type": "integer", "minimum": 0},
        "replicates": {"type": "integer", "minimum": 1},
        "workers": {"type": "integer", "minimum": 1},
        "out": {"type": "string"},
        "initial": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["abk", "modulated", "power_exp", "lattice", "violating", "file"]},
                "L": _pos,
                "alpha": {"type": "number", "minimum": 0, "maximum": 1},
                "beta": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "p": _num,
                "c": _num,
                "q": _pos,
                "path": {"type": "string"},
            },
        },
        "evolve": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "horizon": _pos,
                "barrier_gap": {"oneOf": [_pos, {"const": "none"}]},
                "step_cap": {"type": "integer", "minimum": 1},
                "cull_every": _pos,
            },
        },
        "grids": {
            "type": "object",
            "additionalProperties": False,
            "properties": {k: _grid for k in ("y", "s", "lam", "n", "t", "x")},
        },
        "criteria": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "statistics": {
                    "type": "array",
                    "items": {"enum": ["cesaro", "cubic", "tightness", "r_stat", "probe"]},
                    "minItems": 1,
                },
                "eps": _pos,
                "relative": {"type": "boolean"},
            },
        },
        "fkpp": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "profile": {"enum": ["heaviside", "staircase"]},
                "staircase": {"type": "array", "items": {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}},
                "t": _pos,
                "dx": _pos,
                "dt": _pos,
                "t_grid": _grid,
                "c_of_f_r": _pos,
            },
        },
        "tauberian": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "sampler": {"enum": ["abk", "pareto", "power"]},
                "rho": _pos,
                "C": _pos,
                "lam": _grid,
                "x": _grid,
                "tol": _pos,
                "alpha": {"type": "number", "minimum": 0, "maximum": 1},
                "beta": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "t_grid": _grid,
            },
        },
        "verify": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "scale": {"enum": ["full", "smoke"]},
                "criteria": {"type": "array", "items": {"type": "integer", "minimum": 1, "maximum": 14}, "minItems": 1},
            },
        },
    },
}

DEFAULTS = {
    "seed": 0,
    "replicates": 200,
    "workers": 1,
    "out": "out",
    "initial": {"kind": "abk", "L": 40.0, "alpha": 1.0, "beta": 0.5, "p": 1.0, "c": 1.0, "q": 1.0, "path": ""},
    "evolve": {"horizon": 1.0, "barrier_gap": 30.0, "step_cap": 50_000_000, "cull_every": 0.5},
    "grids": {
        "y": [5.0, 10.0, 20.0, 30.0],
        "s": [10.0, 30.0, 90.0],
        "lam": [0.5, 0.1, 0.02],
        "n": [2.0, 4.0, 8.0, 16.0],
        "t": [50.0, 100.0, 200.0],
        "x": [16.0, 100.0, 400.0, 1600.0],
    },
    "criteria": {"statistics": ["cesaro", "cubic", "tightness", "r_stat", "probe"], "eps": 0.05, "relative": True},
    "fkpp": {"profile": "heaviside", "staircase": [[1.0, 0.0]], "t": 10.0, "dx": 0.05, "dt": 0.01,
             "t_grid": [1.0, 2.0, 5.0, 10.0], "c_of_f_r": 20.0},
    "tauberian": {"sampler": "abk", "rho": 1.5, "C": 0.3535533905932738, "lam": [0.5, 0.1, 0.02, 0.005],
                  "x": [16.0, 100.0, 400.0, 1600.0], "tol": 0.1, "alpha": 1.0, "beta": 0.5,
                  "t_grid": [1.25, 2.5, 5.0, 10.0, 20.0, 40.0]},
    "verify": {"scale": "full", "criteria": list(range(1, 15))},
}


def _locate(text: str, path: list) -> int | None:
    """Best-effort line number of a dotted key in TOML source."""
    if not text or not path:
        return None
    lines = text.splitlines()
    section = None
    keys = [p for p in path if isinstance(p, str)]
    target_section = keys[0] if len(keys) > 1 else None
    key = keys[-1] if keys else None
    for i, line in enumerate(lines, start=1):
        s = line.strip()
        m = re.match(r"^\[([^\]]+)\]$", s)
        if m:
            section = m.group(1).strip()
            if target_section and section == target_section and len(keys) == 1:
                return i
            continue
        if key and re.match(rf"^{re.escape(key)}\s*=", s) and section == target_section:
            return i
    return None


def validate(data: dict, text: str = "") -> None:
    validator = jsonschema.Draft7Validator(SCHEMA)
    errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        path = list(err.absolute_path)
        field = ".".join(str(p) for p in path) or "<root>"
        raise ConfigError(err.message, field=field, line=_locate(text, path))


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def resolve(data: dict, text: str = "") -> dict:
    """Validate user settings and merge them over the defaults."""
    validate(data, text)
    cfg = _merge(DEFAULTS, data)
    for name, grid in cfg["grids"].items():
        if any(b <= a for a, b in zip(grid, grid[1:])) and name != "lam":
            raise ConfigError("grid must be strictly increasing", field=f"grids.{name}", line=_locate(text, ["grids", name]))
    if cfg["initial"]["kind"] == "file" and not cfg["initial"]["path"]:
        raise ConfigError("file initial condition needs a path", field="initial.path")
    if cfg["initial"]["kind"] in ("lattice", "violating") and cfg["initial"]["L"] < 2:
        raise ConfigError("lattice measures need L >= 2", field="initial.L", line=_locate(text, ["initial", "L"]))
    return cfg


def load(path, overrides: dict | None = None) -> dict:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ConfigError(f"invalid TOML: {exc}", line=int(m.group(1)) if m else None) from exc
    for k, v in (overrides or {}).items():
        if v is not None:
            data[k] = v
    return resolve(data, text)


def dumps(cfg: dict) -> str:
    return tomli_w.dumps(cfg)


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()[:16]
