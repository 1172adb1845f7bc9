"""JSON run configurations for the command-line driver.

Each subcommand has its own schema; shared blocks (``grid``, ranges,
vectors) are defined once below.  A range is either an explicit list of
numbers, a single number, or ``{"start", "stop", "step"}`` with ``stop``
included when it lands on the step lattice.
"""

from __future__ import annotations

import json
from pathlib import Path

import jsonschema
import numpy as np

from .errors import ConfigError
from .kernels import DetectorConfig

POSITIVE = {"type": "number", "exclusiveMinimum": 0}
VEC3 = {"type": "array", "items": {"type": "number"}, "minItems": 3, "maxItems": 3}
SEED = {"type": "integer", "minimum": 0, "maximum": 2**64 - 1}
RANGE = {
    "oneOf": [
        {"type": "number"},
        {"type": "array", "items": {"type": "number"}},
        {
            "type": "object",
            "properties": {"start": {"type": "number"}, "stop": {"type": "number"}, "step": POSITIVE},
            "required": ["start", "stop", "step"],
            "additionalProperties": False,
        },
    ]
}
GRID = {
    "type": "object",
    "properties": {
        "grid_points": {"type": "integer", "minimum": 256},
        "grid_extent": {"oneOf": [POSITIVE, {"type": "null"}]},
        "mc_samples": {"type": "integer", "minimum": 1},
        "mc_strata": {"type": "integer", "minimum": 1, "maximum": 64},
    },
    "additionalProperties": False,
}
STATE = {**VEC3, "description": "Bloch vector of the system state"}
OBSERVABLE = {
    "type": "object",
    "properties": {"x": {"type": "number"}, "m": VEC3},
    "required": ["m"],
    "additionalProperties": False,
}


def _command(properties: dict, required: list[str]) -> dict:
    props = {"grid": GRID, "seed": SEED, "output": {"type": "string"}, **properties}
    return {"type": "object", "properties": props, "required": required, "additionalProperties": False}


SCHEMAS = {
    "sweep-aprime": _command(
        {
            "sigma_a": RANGE,
            "sigma_b": {"oneOf": [RANGE, {"const": "equal"}]},
        },
        ["sigma_a", "sigma_b"],
    ),
    "post-state": _command(
        {
            "sigmas": {"type": "array", "items": POSITIVE, "minItems": 2, "maxItems": 2},
            "state": STATE,
            "outcome": {"enum": ["++", "+-", "-+", "--"]},
            "sigma_sweep": RANGE,
        },
        ["sigmas", "state"],
    ),
    "fidelities": _command(
        {
            "sigmas": {
                "type": "array",
                "items": {"type": "array", "items": POSITIVE, "minItems": 2, "maxItems": 2},
                "minItems": 1,
            },
            "states": {"type": "array", "items": STATE},
        },
        ["sigmas"],
    ),
    "oblique": _command(
        {
            "a_prime": {"type": "number", "minimum": 0},
            "sigma": POSITIVE,
            "state": STATE,
            "theta": RANGE,
        },
        ["state", "theta"],
    ),
    "three-sweep": _command(
        {
            "sigma": RANGE,
            "sigmas": {
                "type": "array",
                "items": {"type": "array", "items": POSITIVE, "minItems": 3, "maxItems": 3},
                "minItems": 1,
            },
            "oracle": {"type": "boolean"},
        },
        ["seed"],
    ),
    "ft-check": _command(
        {
            "directions": {
                "type": "object",
                "properties": {"l": VEC3, "m": VEC3, "n": VEC3},
                "required": ["l", "m", "n"],
                "additionalProperties": False,
            },
            "angles": {
                "type": "object",
                "properties": {"theta": {"type": "number"}, "phi": {"type": "number"}, "phi1": {"type": "number"}},
                "required": ["theta", "phi", "phi1"],
                "additionalProperties": False,
            },
            "angles_in_pi": {"type": "boolean"},
            "scale": {"type": "number", "minimum": 0},
        },
        [],
    ),
    "jm-check": _command(
        {
            "pairs": {
                "type": "array",
                "items": {
                    "type": "object",
                    "properties": {
                        "obs1": OBSERVABLE,
                        "obs2": OBSERVABLE,
                        "Z": {"type": "number"},
                        "z": VEC3,
                    },
                    "required": ["obs1", "obs2"],
                    "additionalProperties": False,
                },
            },
            "triples": {
                "type": "array",
                "items": {
                    "type": "object",
                    "properties": {
                        "obs1": OBSERVABLE,
                        "obs2": OBSERVABLE,
                        "obs3": OBSERVABLE,
                        "Z": {"type": "array", "items": {"type": "number"}, "minItems": 4, "maxItems": 4},
                        "zs": {"type": "array", "items": VEC3, "minItems": 4, "maxItems": 4},
                    },
                    "required": ["obs1", "obs2", "obs3"],
                    "additionalProperties": False,
                },
            },
        },
        [],
    ),
}

# seed is mandatory only where Monte Carlo runs
MC_COMMANDS = {"three-sweep"}


def validate(command: str, cfg: dict, seed_override: int | None = None) -> dict:
    if command not in SCHEMAS:
        raise ConfigError(f"unknown command {command!r}")
    cfg = dict(cfg)
    if seed_override is not None:
        cfg["seed"] = seed_override
    try:
        jsonschema.validate(cfg, SCHEMAS[command])
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{command} config invalid at {where}: {exc.message}") from None
    return cfg


def load(path: str | Path, command: str, seed_override: int | None = None) -> dict:
    try:
        raw = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    return validate(command, raw, seed_override)


def expand_range(spec, name: str = "range") -> np.ndarray:
    """Numbers described by a range block, in order."""
    if isinstance(spec, (int, float)):
        vals = np.array([float(spec)])
    elif isinstance(spec, list):
        vals = np.asarray(spec, dtype=float)
    else:
        start, stop, step = spec["start"], spec["stop"], spec["step"]
        count = int(np.floor((stop - start) / step + 1e-9)) + 1
        vals = start + step * np.arange(max(count, 0))
        vals = np.round(vals, 12)
    if vals.size == 0:
        raise ConfigError(f"{name} is empty")
    return vals


def detector_config(cfg: dict, sigmas) -> DetectorConfig:
    grid = cfg.get("grid", {})
    try:
        return DetectorConfig(tuple(sigmas), seed=int(cfg.get("seed", 0)), **grid)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
