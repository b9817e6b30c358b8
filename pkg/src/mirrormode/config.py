"""Experiment configuration: strict JSON schema, unit conversion, hashing.

Frequencies enter in ordinary MHz (GHz for the transition) and are converted
to angular units on load; times are microseconds; filter lengths tau and xi
are the paper-style dimensionless widths (scaled by gamma_2 internally).
Unknown keys are rejected.
"""
from __future__ import annotations

import hashlib
import json

import jsonschema

from .errors import ConfigError
from .qubit import SystemParams, critical_drive

_NUM = {"type": "number"}
_POSNUM = {"type": "number", "exclusiveMinimum": 0}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "params": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "delta_mhz": _NUM,
                "omega_mhz": _NUM,
                "gamma_r_mhz": _POSNUM,
                "gamma_1_mhz": _POSNUM,
                "gamma_2_mhz": _POSNUM,
                "phi": _NUM,
                "phi_convention": {"enum": ["supplement", "main_text"]},
                "omega01_ghz": _POSNUM,
                "drive": {"enum": ["given", "critical"]},
            },
        },
        "sweep": {
            "type": "object",
            "additionalProperties": False,
            "required": ["name", "start", "stop", "points"],
            "properties": {
                "name": {"enum": ["tau", "xi", "omega_over_gamma_1",
                                  "delta_mhz"]},
                "start": _NUM,
                "stop": _NUM,
                "points": {"type": "integer", "minimum": 1},
            },
        },
        "filter": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["boxcar", "gaussian", "custom"]},
                "tau": _POSNUM,
                "xi": _POSNUM,
                "t_start_us": _NUM,
                "path": {"type": "string"},
            },
        },
        "tomography": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "mode": {"enum": ["ideal", "exact-moments", "records"]},
                "order_cap": {"type": "integer", "minimum": 2, "maximum": 10},
                "noise_photons": {"type": "number", "minimum": 0},
                "shots": {"type": "integer", "minimum": 0},
                "bootstrap": {"type": "integer", "minimum": 0},
                "seed": {"type": "integer"},
            },
        },
        "simulation": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "fock_cutoff": {"type": "integer", "minimum": 3, "maximum": 40},
                "mode_dim": {"type": "integer", "minimum": 2, "maximum": 20},
                "norm_floor": _POSNUM,
                "step_scale": _POSNUM,
            },
        },
        "wigner": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "extent": _POSNUM,
                "step": _POSNUM,
                "log_base": {"enum": ["natural", "two"]},
            },
        },
        "dephasing_map": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "gamma_p_khz": {"type": "array", "items": {"type": "number",
                                                           "minimum": 0}},
                "gamma_n_over_gamma_r": {"type": "array",
                                         "items": {"type": "number",
                                                   "minimum": 0}},
                "xi_bounds": {"type": "array", "items": _POSNUM,
                              "minItems": 2, "maxItems": 2},
            },
        },
        "optimizer": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "family": {"enum": ["gaussian", "boxcar", "spline"]},
                "budget": {"type": "integer", "minimum": 10},
                "restarts": {"type": "integer", "minimum": 0},
                "nodes": {"type": "integer", "minimum": 3, "maximum": 8},
                "window": _POSNUM,
                "bounds": {"type": "array", "items": _NUM,
                           "minItems": 2, "maxItems": 2},
            },
        },
        "mollow": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "noise_relative": {"type": "number", "minimum": 0},
                "n_freqs": {"type": "integer", "minimum": 51},
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "formats": {"type": "array",
                            "items": {"enum": ["csv", "json"]}},
            },
        },
    },
}

DEFAULTS = {
    "params": {"delta_mhz": 0.0, "omega_mhz": 0.0, "gamma_r_mhz": 1.110,
               "gamma_1_mhz": 1.110, "gamma_2_mhz": 0.555, "phi": 0.0,
               "phi_convention": "supplement", "omega01_ghz": 5.50703,
               "drive": "critical"},
    "sweep": None,
    "filter": {"kind": "boxcar", "tau": 2.0, "xi": 0.5, "t_start_us": 0.0},
    "tomography": {"mode": "ideal", "order_cap": 6, "noise_photons": 0.0,
                   "shots": 200000, "bootstrap": 200, "seed": 7},
    "simulation": {"fock_cutoff": 10, "mode_dim": 5, "norm_floor": 1e-8,
                   "step_scale": 1.0},
    "wigner": {"extent": 4.2, "step": 0.07, "log_base": "natural"},
    "dephasing_map": {"gamma_p_khz": [0.0, 25.0], "gamma_n_over_gamma_r":
                      [0.0, 0.023], "xi_bounds": [0.3, 0.9]},
    "optimizer": {"family": "gaussian", "budget": 200, "restarts": 2,
                  "nodes": 6, "window": 8.0, "bounds": [0.25, 1.2]},
    "mollow": {"noise_relative": 0.0, "n_freqs": 801},
    "output": {"formats": ["csv"]},
}


def _merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def validate_config(raw: dict) -> dict:
    """Schema-check, then merge over defaults; returns the resolved config."""
    try:
        jsonschema.validate(raw, SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"config invalid: {exc.message}") from exc
    resolved = {}
    for key, default in DEFAULTS.items():
        if default is None:
            if key in raw:
                resolved[key] = raw[key]
        else:
            resolved[key] = _merge(default, raw.get(key, {}))
    return resolved


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    return validate_config(raw)


def config_hash(cfg: dict) -> str:
    """Stable short hash of the resolved config (provenance header)."""
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def system_params(cfg: dict) -> SystemParams:
    """SystemParams from the config's params block, resolving critical drive."""
    pb = cfg["params"]
    try:
        p = SystemParams.from_mhz(
            delta_mhz=pb["delta_mhz"], omega_mhz=pb["omega_mhz"],
            gamma_r_mhz=pb["gamma_r_mhz"], gamma_1_mhz=pb["gamma_1_mhz"],
            gamma_2_mhz=pb["gamma_2_mhz"], phi=pb["phi"],
            omega01_ghz=pb["omega01_ghz"],
            negate_phi=(pb["phi_convention"] == "main_text"))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if pb["drive"] == "critical":
        d_star, om_star = critical_drive(p)
        p = p.with_drive(d_star, om_star)
    return p
