"""Versioned JSON run configuration: schema, validation and model construction."""

from __future__ import annotations

import copy
import json

import jsonschema

from .conditional import GibbsModel
from .errors import ConfigError
from .geometry import LatticeSpec, Window
from .inference import EstimatorConfig
from .interactions import InteractionModel
from .moves import MoveModel
from .sampler import DEFAULT_BURN_IN, DEFAULT_SWEEPS, SimulationPlan

SCHEMA_VERSION = 1

_num = {"type": "number"}
_vec = {"type": "array", "items": _num, "minItems": 1}
_window = {"type": "object", "required": ["lower", "upper"], "additionalProperties": False,
           "properties": {"lower": _vec, "upper": _vec}}

SCHEMA = {
    "type": "object",
    "required": ["schema", "model"],
    "additionalProperties": False,
    "properties": {
        "schema": {"const": SCHEMA_VERSION},
        "name": {"type": "string"},
        "model": {
            "type": "object",
            "required": ["move", "interaction"],
            "additionalProperties": False,
            "properties": {
                "dimension": {"type": "integer", "minimum": 1},
                "move": {
                    "type": "object", "required": ["family"], "additionalProperties": False,
                    "properties": {
                        "family": {"enum": ["uniform", "gaussian", "exponential"]},
                        "support": _window,
                    },
                },
                "interaction": {
                    "type": "object", "additionalProperties": False,
                    "properties": {
                        "kind": {"enum": ["strauss", "piecewise"]},
                        "R": {"type": "number", "exclusiveMinimum": 0},
                        "breakpoints": _vec,
                        "hardcore_r": {"type": "number", "minimum": 0},
                    },
                },
                "lattice": {
                    "type": "object", "additionalProperties": False,
                    "properties": {"spacing": {"type": "number", "exclusiveMinimum": 0},
                                   "basis": {"type": "array", "items": _vec}},
                },
            },
        },
        "theta": _vec,
        "seed": {"type": "integer", "minimum": 0},
        "simulation": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "obs_half_width": {"type": "number", "exclusiveMinimum": 0},
                "obs_window": _window,
                "sim_window": _window,
                "burn_in": {"type": "integer", "minimum": 0},
                "sweeps": {"type": "integer", "minimum": 1},
                "replicates": {"type": "integer", "minimum": 1},
                "shift": {"oneOf": [_vec, {"type": "null"}]},
            },
        },
        "estimator": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "method": {"enum": ["auto", "takacs-fiksel", "variational"]},
                "beta": {"type": "number"},
                "fixed_m": {"oneOf": [{"type": "number", "minimum": 0}, {"type": "null"}]},
                "quad_resolution": {"oneOf": [{"type": "integer", "minimum": 2},
                                              {"type": "null"}]},
                "optimizer": {"enum": ["simplex", "gradient"]},
                "theta_bounds": {"type": "array",
                                 "items": {"type": "array", "items": _num,
                                           "minItems": 2, "maxItems": 2}},
                "theta_init": _vec,
                "test_functions": {"type": "array", "items": {"type": "string"}, "minItems": 1},
                "ftol": {"type": "number", "exclusiveMinimum": 0},
                "maxiter": {"type": "integer", "minimum": 1},
            },
        },
        "diagnostics": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "radii": _vec,
                "test_functions": {"type": "array", "items": {"type": "string"}},
                "theta": {"oneOf": [_vec, {"const": "fit"}]},
            },
        },
        "experiment": {
            "type": "object", "additionalProperties": False, "required": ["cells", "windows"],
            "properties": {
                "cells": {"type": "array", "minItems": 1, "items": {
                    "type": "object", "required": ["theta", "R"], "additionalProperties": False,
                    "properties": {"theta": _vec, "R": {"type": "number", "exclusiveMinimum": 0},
                                   "label": {"type": "string"}}}},
                "windows": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0},
                            "minItems": 1},
                "replicates": {"type": "integer", "minimum": 1},
                "divergence_tolerance": {"type": "number", "exclusiveMinimum": 0},
                "unstable_rate": {"type": "number", "minimum": 0, "maximum": 1},
            },
        },
    },
}


def _path_of(err: jsonschema.ValidationError) -> str:
    parts = [str(p) for p in err.absolute_path]
    if err.validator == "required":
        missing = err.message.split("'")[1] if "'" in err.message else "?"
        parts.append(missing)
    if err.validator == "additionalProperties" and "'" in err.message:
        parts.append(err.message.split("'")[1])
    return ".".join(parts) or "<root>"


def validate(cfg: dict) -> dict:
    """Schema-check ``cfg``; errors name the offending key."""
    v = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(v.iter_errors(cfg), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        e = errors[0]
        raise ConfigError(f"config key '{_path_of(e)}': {e.message}")
    return cfg


def load(path) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON (line {exc.lineno}): {exc.msg}") \
            from exc
    return validate(cfg)


def build_model(cfg: dict, R: float | None = None) -> GibbsModel:
    """Model structure from the ``model`` block; ``R`` overrides the range."""
    m = cfg["model"]
    mv = m["move"]
    d = m.get("dimension") or (len(mv["support"]["lower"]) if "support" in mv else 2)
    fam = mv["family"]
    try:
        if fam == "uniform":
            if "support" not in mv:
                raise ConfigError("config key 'model.move.support': required for uniform moves")
            move = MoveModel.uniform(mv["support"]["lower"], mv["support"]["upper"])
        elif fam == "gaussian":
            move = MoveModel.gaussian(d)
        else:
            move = MoveModel.exponential(d)
        it = m["interaction"]
        r = float(it.get("hardcore_r", 0.0))
        if R is not None:
            inter = InteractionModel.strauss(R, r)
        elif "breakpoints" in it:
            inter = InteractionModel(tuple(it["breakpoints"]), r)
        elif "R" in it:
            inter = InteractionModel.strauss(it["R"], r)
        else:
            raise ConfigError("config key 'model.interaction.R': range or breakpoints required")
        lat = m.get("lattice", {})
        if "basis" in lat:
            lattice = LatticeSpec(tuple(tuple(b) for b in lat["basis"]))
        else:
            lattice = LatticeSpec.cubic(move.dimension, lat.get("spacing", 1.0))
        return GibbsModel(move, inter, lattice)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"config key 'model': {exc}") from exc


def estimator_config(cfg: dict) -> EstimatorConfig:
    est = {k: v for k, v in cfg.get("estimator", {}).items() if k != "method"}
    try:
        return EstimatorConfig(**est)
    except ConfigError as exc:
        raise ConfigError(f"config key 'estimator': {exc}") from exc


def obs_window(cfg: dict, d: int, half_width: float | None = None) -> Window:
    sim = cfg.get("simulation", {})
    if half_width is not None:
        return Window.cube(half_width, d)
    if "obs_window" in sim:
        return Window.from_dict(sim["obs_window"])
    if "obs_half_width" in sim:
        return Window.cube(sim["obs_half_width"], d)
    raise ConfigError("config key 'simulation.obs_half_width': an observation window is required")


def simulation_plan(cfg: dict, seed: int | None = None, gm: GibbsModel | None = None,
                    theta=None, half_width: float | None = None) -> SimulationPlan:
    gm = gm or build_model(cfg)
    sim = cfg.get("simulation", {})
    if theta is None:
        if "theta" not in cfg:
            raise ConfigError("config key 'theta': required for simulation")
        theta = cfg["theta"]
    try:
        tv = gm.theta(theta)
    except ValueError as exc:
        raise ConfigError(f"config key 'theta': {exc}") from exc
    sim_w = Window.from_dict(sim["sim_window"]) if "sim_window" in sim else None
    plan = SimulationPlan(gm, tv, obs_window(cfg, gm.dimension, half_width), sim_w,
                          sim.get("sweeps", DEFAULT_SWEEPS), sim.get("burn_in", DEFAULT_BURN_IN),
                          cfg.get("seed", 0) if seed is None else seed,
                          tuple(sim["shift"]) if sim.get("shift") is not None else None)
    try:
        plan.validate()
    except ConfigError as exc:
        raise ConfigError(f"config key 'simulation': {exc}") from exc
    return plan


def resolved(cfg: dict, **extra) -> dict:
    """Copy of ``cfg`` with defaults filled in, for embedding in outputs."""
    out = copy.deepcopy(cfg)
    sim = out.setdefault("simulation", {})
    sim.setdefault("burn_in", DEFAULT_BURN_IN)
    sim.setdefault("sweeps", DEFAULT_SWEEPS)
    sim.setdefault("replicates", 1)
    out.setdefault("seed", 0)
    est = out.setdefault("estimator", {})
    for k, v in EstimatorConfig().to_dict().items():
        est.setdefault(k, v)
    est.setdefault("method", "auto")
    out.update(extra)
    return out
