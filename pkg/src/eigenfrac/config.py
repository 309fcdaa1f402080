"""JSON run configuration: schema, defaults, canonical hashing.

Configs are strict — unknown keys are rejected so a typo cannot
silently fall back to a default — and hashed in canonical form so a
report can always be traced to the exact inputs that produced it.
"""

import copy
import hashlib
import json

import jsonschema
import numpy as np

from .fem import BoundaryLoad, affine_ramp, shear_ramp, uniform_stretch
from .mesh import DomainSpec, ResolutionCoupling
from .minimizer import MinimizeStrategy


class ConfigError(ValueError):
    pass


_SIDES = ["left", "right", "bottom", "top"]

_DOMAIN_SCHEMA = {
    "type": "object", "additionalProperties": False,
    "properties": {
        "omega": {"type": "array", "items": {"type": "number"},
                  "minItems": 4, "maxItems": 4},
        "collar_width": {"type": "number", "exclusiveMinimum": 0},
        "dirichlet_sides": {"type": "array", "minItems": 1, "uniqueItems": True,
                            "items": {"enum": _SIDES}},
    },
}

_COUPLING_SCHEMA = {
    "type": "object", "additionalProperties": False,
    "properties": {
        "scale": {"type": "number", "exclusiveMinimum": 0},
        "exponent": {"type": "number", "exclusiveMinimum": 1},
    },
}

_LOAD_SCHEMA = {
    "type": "object", "additionalProperties": False,
    "required": ["protocol"],
    "properties": {
        "protocol": {"enum": ["uniform-stretch", "shear-ramp", "affine-ramp"]},
        "rate": {"type": "number"},
        "coeffs": {"type": "array", "items": {"type": "number"},
                   "minItems": 3, "maxItems": 3},
    },
}

_STRATEGY_SCHEMA = {
    "type": "object", "additionalProperties": False,
    "properties": {
        "variant": {"enum": ["greedy", "greedy+nucleation"]},
        "sweep_limit": {"type": "integer", "minimum": 1},
        "cut_family": {"type": "array", "uniqueItems": True,
                       "items": {"enum": ["columns", "completions", "singles"]}},
        "full_sweep": {"type": "boolean"},
        "top_k": {"type": "integer", "minimum": 0},
        "single_trials": {"type": "integer", "minimum": 0},
        "exact_cutoff": {"type": "integer", "minimum": 0, "maximum": 16},
    },
}

SIMULATE_SCHEMA = {
    "type": "object", "additionalProperties": False,
    "required": ["epsilon", "time_level", "load"],
    "properties": {
        "domain": _DOMAIN_SCHEMA,
        "epsilon": {"type": "number", "exclusiveMinimum": 0},
        "kappa": {"type": "number", "exclusiveMinimum": 0},
        "elastic_tensor": {"type": "array", "minItems": 2, "maxItems": 2,
                           "items": {"type": "array", "minItems": 2,
                                     "maxItems": 2,
                                     "items": {"type": "number"}}},
        "coupling": _COUPLING_SCHEMA,
        "time_level": {"type": "integer", "minimum": 0, "maximum": 12},
        "load": _LOAD_SCHEMA,
        "strategy": _STRATEGY_SCHEMA,
        "count_exterior": {"type": "boolean"},
        "threads": {"type": "integer", "minimum": 1},
        "snapshots": {"type": "integer", "minimum": 0},
    },
}

STUDY_SCHEMA = {
    "type": "object", "additionalProperties": False,
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["tube", "bar", "balance", "simultaneous",
                          "goodset", "growth"]},
        "domain": _DOMAIN_SCHEMA,
        "coupling": _COUPLING_SCHEMA,
        "eps_list": {"type": "array", "minItems": 1,
                     "items": {"type": "number", "exclusiveMinimum": 0}},
        "level": {"type": "integer", "minimum": 0, "maximum": 12},
        "levels": {"type": "array", "minItems": 1,
                   "items": {"type": "integer", "minimum": 0, "maximum": 12}},
        "schedule": {"type": "array", "minItems": 1,
                     "items": {"type": "array", "minItems": 2, "maxItems": 2}},
        "t_max": {"type": "number", "exclusiveMinimum": 0},
        "kappa": {"type": "number", "exclusiveMinimum": 0},
        "n_clouds": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "threads": {"type": "integer", "minimum": 1},
    },
}

ORACLE_SCHEMA = {
    "type": "object", "additionalProperties": False,
    "properties": {
        "n_instances": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "cap": {"type": "integer", "minimum": 1, "maximum": 20},
        "strategy": _STRATEGY_SCHEMA,
        "threads": {"type": "integer", "minimum": 1},
    },
}

SIMULATE_DEFAULTS = {
    "domain": {"omega": [0.0, 0.0, 1.0, 1.0], "collar_width": 0.2,
               "dirichlet_sides": ["left", "right"]},
    "kappa": 1.0,
    "elastic_tensor": [[1.0, 0.0], [0.0, 1.0]],
    "coupling": {"scale": 1.0, "exponent": 1.5},
    "load": {"rate": 1.0, "coeffs": [1.0, 0.0, 0.0]},
    "strategy": {"variant": "greedy+nucleation", "sweep_limit": 100,
                 "cut_family": ["columns", "completions", "singles"],
                 "full_sweep": False, "top_k": 32, "single_trials": 4,
                 "exact_cutoff": 10},
    "count_exterior": True,
    "threads": 1,
    "snapshots": 0,
}

STUDY_DEFAULTS = {
    "domain": SIMULATE_DEFAULTS["domain"],
    "coupling": SIMULATE_DEFAULTS["coupling"],
    "eps_list": [0.08, 0.04, 0.02],
    "level": 6,
    "levels": [6, 7],
    "schedule": [[0.08, 4], [0.04, 5], [0.02, 6]],
    "t_max": 2.0,
    "kappa": 1.0,
    "n_clouds": 100,
    "seed": 0,
    "threads": 1,
}

ORACLE_DEFAULTS = {
    "n_instances": 50,
    "seed": 11,
    "cap": 16,
    "strategy": {"full_sweep": True},
    "threads": 1,
}


def _merge(defaults: dict, given: dict) -> dict:
    out = copy.deepcopy(defaults)
    for k, v in given.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def validate_config(cfg: dict, schema: dict, defaults: dict) -> dict:
    """Validate against ``schema``, then fill defaults; raises ConfigError."""
    try:
        jsonschema.validate(cfg, schema)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"invalid config: {exc.message}") from exc
    return _merge(defaults, cfg)


def config_hash(cfg: dict) -> str:
    """sha256 of the canonical JSON form (sorted keys, compact)."""
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def domain_from_config(cfg: dict) -> DomainSpec:
    d = cfg["domain"]
    return DomainSpec(omega=tuple(d["omega"]),
                      collar_width=d["collar_width"],
                      dirichlet_sides=tuple(d["dirichlet_sides"]))


def coupling_from_config(cfg: dict) -> ResolutionCoupling:
    c = cfg["coupling"]
    return ResolutionCoupling(scale=c["scale"], exponent=c["exponent"])


def load_from_config(cfg: dict) -> BoundaryLoad:
    ld = cfg["load"]
    proto = ld["protocol"]
    if proto == "uniform-stretch":
        return uniform_stretch(rate=ld["rate"])
    if proto == "shear-ramp":
        return shear_ramp(rate=ld["rate"])
    ax, ay, b = ld["coeffs"]
    return affine_ramp(ax, ay, b, rate=ld["rate"])


def strategy_from_config(cfg: dict) -> MinimizeStrategy:
    s = dict(SIMULATE_DEFAULTS["strategy"])
    s.update(cfg.get("strategy", {}))
    return MinimizeStrategy(variant=s["variant"], sweep_limit=s["sweep_limit"],
                            cut_family=tuple(s["cut_family"]),
                            full_sweep=s["full_sweep"], top_k=s["top_k"],
                            single_trials=s["single_trials"],
                            exact_cutoff=s["exact_cutoff"])


def elastic_tensor_from_config(cfg: dict) -> np.ndarray:
    return np.asarray(cfg["elastic_tensor"], dtype=np.float64)
