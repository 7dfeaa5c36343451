"""JSON run configuration: schema, validation and construction of domain objects."""

from __future__ import annotations

import json
from typing import Any, Dict

import jsonschema
import numpy as np

from .errors import ConfigError
from .flow import FlowParams
from .geometry import SU3Background, WarpedProfile, cyclic_winding
from .numerics import Grid, StepControl

__all__ = ["SCHEMA", "load_config", "parse_config", "build_profile", "build_step_control", "eval_preset"]

_num = {"type": "number"}

_PRESET_PARAMS = {
    "constant": {"value"},
    "linear": {"a", "b"},
    "sin": {"amplitude", "frequency", "phase", "offset"},
    "cos": {"amplitude", "frequency", "phase", "offset"},
    "exp": {"amplitude", "rate", "offset"},
}

_field = {
    "oneOf": [
        {
            "type": "object",
            "properties": {"samples": {"type": "array", "items": _num, "minItems": 8}},
            "required": ["samples"],
            "additionalProperties": False,
        },
        {
            "type": "object",
            "properties": {
                "expr": {"enum": sorted(_PRESET_PARAMS)},
                "params": {"type": "object", "additionalProperties": _num},
            },
            "required": ["expr"],
            "additionalProperties": False,
        },
    ]
}

_profile = {
    "type": "object",
    "properties": {
        "lambda": _num,
        "grid": {
            "type": "object",
            "properties": {
                "n": {"type": "integer", "minimum": 8},
                "r_min": _num,
                "r_max": _num,
                "topology": {"enum": ["circle", "interval"]},
            },
            "required": ["n", "r_min", "r_max", "topology"],
            "additionalProperties": False,
        },
        "G": _field,
        "h": _field,
        "theta": _field,
        "theta_winding": _num,
    },
    "required": ["lambda", "grid", "G", "h", "theta"],
    "additionalProperties": False,
}

_step_control = {
    "type": "object",
    "properties": {
        "rtol": {"type": "number", "exclusiveMinimum": 0},
        "atol": {"type": "number", "exclusiveMinimum": 0},
        "dt_init": {"type": "number", "exclusiveMinimum": 0},
        "dt_min": {"type": "number", "exclusiveMinimum": 0},
        "max_steps": {"type": "integer", "minimum": 1},
    },
    "additionalProperties": False,
}

_flow = {
    "type": "object",
    "properties": {"k": _num, "C": _num, "mu": _num, "t_end": {"type": "number", "minimum": 0}},
    "required": ["t_end"],
    "additionalProperties": False,
}

_span = {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}

_soliton = {
    "oneOf": [
        {
            "type": "object",
            "properties": {
                "family": {"enum": ["parabolic", "hyperbolic", "trig"]},
                "C": _num,
                "R": {"type": "number", "minimum": 0},
                "r0": _num,
                "theta0": _num,
                "sign": {"enum": [1, -1]},
                "r_span": _span,
                "n_samples": {"type": "integer", "minimum": 2},
                "integrate": {"type": "boolean"},
            },
            "required": ["family", "C", "R"],
            "additionalProperties": False,
        },
        {
            "type": "object",
            "properties": {
                "catalog": {
                    "type": "object",
                    "properties": {"C": _num, "mu": _num},
                    "required": ["C", "mu"],
                    "additionalProperties": False,
                }
            },
            "required": ["catalog"],
            "additionalProperties": False,
        },
        {
            "type": "object",
            "properties": {
                "ics": {
                    "type": "object",
                    "properties": {"alpha": _num, "beta": _num, "l": _num},
                    "required": ["alpha", "l"],
                    "additionalProperties": False,
                },
                "lambda": _num,
                "C": _num,
                "mu": _num,
                "k": _num,
                "r_span": _span,
                "n_samples": {"type": "integer", "minimum": 2},
            },
            "required": ["ics", "r_span"],
            "additionalProperties": False,
        },
    ]
}

SCHEMA: Dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "properties": {
        "profile": _profile,
        "flow": _flow,
        "soliton": _soliton,
        "step_control": _step_control,
        "snapshot_stride": {"type": "integer", "minimum": 1},
    },
    "additionalProperties": False,
}

_SWEEP_SCHEMA: Dict[str, Any] = {
    "type": "object",
    "properties": {
        "runs": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "name": {"type": "string", "pattern": "^[A-Za-z0-9_.-]+$"},
                    "command": {"enum": ["torsion", "flow", "soliton"]},
                    "config": SCHEMA,
                },
                "required": ["name", "command", "config"],
                "additionalProperties": False,
            },
        }
    },
    "required": ["runs"],
    "additionalProperties": False,
}


def parse_config(text: str, schema: Dict[str, Any] = SCHEMA) -> Dict[str, Any]:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    try:
        jsonschema.validate(data, schema)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"invalid config at {where}: {exc.message}") from exc
    _check_presets(data)
    return data


def parse_sweep(text: str) -> Dict[str, Any]:
    data = parse_config(text, _SWEEP_SCHEMA)
    names = [r["name"] for r in data["runs"]]
    if len(set(names)) != len(names):
        raise ConfigError("sweep run names must be unique")
    return data


def load_config(path: str, schema: Dict[str, Any] = SCHEMA) -> Dict[str, Any]:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    return parse_config(text, schema)


def _check_presets(data: Dict[str, Any]) -> None:
    prof = data.get("profile")
    if prof is None:
        for run in data.get("runs", []):
            _check_presets(run["config"])
        return
    g = prof["grid"]
    if not g["r_max"] > g["r_min"]:
        raise ConfigError("grid needs r_max > r_min")
    for key in ("G", "h", "theta"):
        spec = prof[key]
        if "expr" in spec:
            extra = set(spec.get("params", {})) - _PRESET_PARAMS[spec["expr"]]
            if extra:
                raise ConfigError(f"profile/{key}: unknown parameters {sorted(extra)} for preset {spec['expr']!r}")
        elif len(spec["samples"]) != g["n"]:
            raise ConfigError(f"profile/{key}: {len(spec['samples'])} samples for a grid of n={g['n']}")


def eval_preset(name: str, params: Dict[str, float], r: np.ndarray) -> np.ndarray:
    """Named closed-form profile functions."""
    p = params
    if name == "constant":
        return np.full_like(r, p.get("value", 0.0))
    if name == "linear":
        return p.get("a", 0.0) + p.get("b", 0.0) * r
    if name in ("sin", "cos"):
        fn = np.sin if name == "sin" else np.cos
        return p.get("offset", 0.0) + p.get("amplitude", 1.0) * fn(p.get("frequency", 1.0) * r + p.get("phase", 0.0))
    if name == "exp":
        return p.get("offset", 0.0) + p.get("amplitude", 1.0) * np.exp(p.get("rate", 1.0) * r)
    raise ConfigError(f"unknown preset {name!r}")


def build_profile(prof: Dict[str, Any]) -> WarpedProfile:
    g = prof["grid"]
    try:
        grid = Grid(g["n"], g["r_min"], g["r_max"], g["topology"])
    except ValueError as exc:
        raise ConfigError(f"profile/grid: {exc}") from exc
    r = grid.nodes

    def field(key):
        spec = prof[key]
        if "samples" in spec:
            return np.asarray(spec["samples"], dtype=float)
        return eval_preset(spec["expr"], spec.get("params", {}), r)

    theta = field("theta")
    if "theta_winding" in prof:
        winding = float(prof["theta_winding"])
    elif not grid.periodic:
        winding = 0.0
    elif "expr" in prof["theta"]:
        spec = prof["theta"]
        ends = eval_preset(spec["expr"], spec.get("params", {}), np.array([grid.r_min, grid.r_max]))
        winding = float(ends[1] - ends[0])
    else:
        winding = cyclic_winding(theta)
    try:
        return WarpedProfile(grid, field("G"), field("h"), theta, SU3Background(prof["lambda"]), winding)
    except ValueError as exc:
        raise ConfigError(f"profile: {exc}") from exc


def build_step_control(data: Dict[str, Any]) -> StepControl:
    try:
        return StepControl(**data.get("step_control", {}))
    except ValueError as exc:
        raise ConfigError(f"step_control: {exc}") from exc


def build_flow_params(data: Dict[str, Any]) -> FlowParams:
    f = data["flow"]
    return FlowParams(k=f.get("k", 2.0), C=f.get("C", 0.0))
