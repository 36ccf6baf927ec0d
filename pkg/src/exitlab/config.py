"""Experiment configuration: one JSON schema shared by every subcommand.

Precedence is flag > file > default.  Validation errors carry the JSON path
of the offending field (``domain.radius``, ``start``, ...).
"""

from __future__ import annotations

import copy
import json
import os
from dataclasses import dataclass

import jsonschema
import numpy as np

from .core import DomainSpec, SpaceSpec
from .samplers import SimConfig

CONFIG_VERSION = 1
OUTPUT_ENV = "EXITLAB_OUTPUT_DIR"


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the field."""


_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_vec = {"type": "array", "items": _num, "minItems": 1}


def _variant(name: str, props: dict, required: list) -> dict:
    return {"if": {"properties": {"variant": {"const": name}}, "required": ["variant"]},
            "then": {"properties": props, "required": required}}


SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "version": {"const": CONFIG_VERSION},
        "space": {
            "type": "object",
            "required": ["variant"],
            "properties": {
                "variant": {"enum": ["euclidean", "heisenberg", "gasket"]},
                "d": {"type": "integer", "minimum": 1},
                "n": {"type": "integer", "minimum": 1},
                "m": {"type": "integer", "minimum": 0, "maximum": 12},
                "generator_scale": _pos,
            },
            "allOf": [
                _variant("euclidean", {}, ["d"]),
                _variant("heisenberg", {}, ["n"]),
                _variant("gasket", {}, ["m"]),
            ],
        },
        "domain": {
            "type": "object",
            "required": ["variant"],
            "properties": {"variant": {"enum": ["interval", "box", "euclidean_ball", "slab",
                                                "polygon2d", "koranyi_ball", "gasket_subset"]}},
            "allOf": [
                _variant("interval", {"a": _num, "b": _num}, ["a", "b"]),
                _variant("box", {"lo": _vec, "hi": _vec}, ["lo", "hi"]),
                _variant("euclidean_ball", {"center": _vec, "radius": _pos}, ["center", "radius"]),
                _variant("slab", {"half_width": _pos,
                                  "free_dims": {"type": "integer", "minimum": 0}},
                         ["half_width", "free_dims"]),
                _variant("polygon2d", {"vertices": {"type": "array", "minItems": 3,
                                                    "items": {"type": "array", "items": _num,
                                                              "minItems": 2, "maxItems": 2}}},
                         ["vertices"]),
                _variant("koranyi_ball", {"center": _vec, "radius": _pos}, ["center", "radius"]),
                _variant("gasket_subset", {"selector": {"type": "object",
                                                        "required": ["type"]}}, []),
            ],
        },
        "start": {"oneOf": [_vec, {"type": "integer", "minimum": 0}]},
        "simulate": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "h": _pos, "t_max": _pos,
                "n_paths": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer", "minimum": 0, "maximum": 2 ** 64 - 1},
                "bridge_correction": {"type": "boolean"},
                "substeps": {"type": "integer", "minimum": 1},
            },
        },
        "solve": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "grid_h": _pos,
                "tol": _pos,
                "maxiter": {"type": "integer", "minimum": 1},
                "gasket_boundary": {"enum": ["corners", "bottom"]},
            },
        },
        "estimate": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "moments": {"type": "array", "items": _pos},
                "exp_a": {"type": "array", "items": _num},
                "grid_points": {"type": "integer", "minimum": 10},
                "grid_t_min": _pos,
                "s_window": {"type": "array", "items": _pos, "minItems": 2, "maxItems": 2},
                "censor_threshold": {"type": "number", "minimum": 0, "maximum": 1},
            },
        },
        "verify": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "suites": {"type": "array", "items": {"type": "string"}},
                "perturb_lambda": _pos,
                "t_range": {"type": "array", "items": _pos, "minItems": 2, "maxItems": 2},
            },
        },
        "hotspots": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"h": _pos, "bound": _pos},
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "dir": {"type": "string"},
                "formats": {"type": "array", "items": {"enum": ["binary", "csv"]}},
            },
        },
        "threads": {"type": "integer", "minimum": 1},
    },
}

DEFAULTS = {
    "version": CONFIG_VERSION,
    "space": {"variant": "euclidean", "d": 1, "generator_scale": 1.0},
    "domain": {"variant": "interval", "a": -1.0, "b": 1.0},
    "simulate": {"h": 1e-4, "t_max": 10.0, "n_paths": 10_000, "seed": 0,
                 "bridge_correction": True, "substeps": 1},
    "solve": {"grid_h": 5e-4, "tol": 1e-10, "maxiter": 10_000, "gasket_boundary": "corners"},
    "estimate": {"moments": [1, 2], "exp_a": [], "grid_points": 400, "s_window": [0.01, 0.5],
                 "censor_threshold": 1e-3},
    "verify": {"suites": [], "perturb_lambda": 1.0},
    "hotspots": {"h": 1 / 256, "bound": 1.02},
    "output": {"formats": ["binary", "csv"]},
}


def _path(err: jsonschema.ValidationError) -> str:
    parts = []
    for p in err.absolute_path:
        parts.append(f"[{p}]" if isinstance(p, int) else ("." if parts else "") + str(p))
    return "".join(parts) or "<root>"


def _deep_merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k not in ("space", "domain"):
            out[k] = _deep_merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def validate(raw: dict) -> None:
    errs = sorted(jsonschema.Draft202012Validator(SCHEMA).iter_errors(raw),
                  key=lambda e: list(map(str, e.absolute_path)))
    if errs:
        # the deepest error is the most specific one
        e = max(errs, key=lambda e: len(e.absolute_path))
        raise ConfigError(f"{_path(e)}: {e.message}")


@dataclass
class ExperimentConfig:
    space: SpaceSpec
    domain: DomainSpec
    start: object
    sim: SimConfig
    raw: dict

    def section(self, name: str) -> dict:
        return self.raw.get(name, {})

    @property
    def output_dir(self) -> str:
        return self.raw["output"]["dir"]

    def to_dict(self) -> dict:
        return copy.deepcopy(self.raw)


def _default_domain(space: SpaceSpec) -> dict:
    if space.variant == "gasket":
        return {"variant": "gasket_subset", "selector": {"type": "whole"}}
    if space.variant == "heisenberg":
        return {"variant": "koranyi_ball", "center": [0.0] * space.coord_dim, "radius": 1.0}
    if space.dim == 1:
        return {"variant": "interval", "a": -1.0, "b": 1.0}
    return {"variant": "euclidean_ball", "center": [0.0] * space.dim, "radius": 1.0}


def _default_start(space: SpaceSpec, domain: DomainSpec):
    if space.variant == "gasket":
        return [0.5, 0.0]
    if domain.variant == "slab":
        return [0.0] * space.coord_dim
    if domain.variant in ("euclidean_ball", "koranyi_ball"):
        return list(domain.params["center"])
    lo, hi = domain.bounding_box()
    return [float(v) for v in 0.5 * (np.asarray(lo) + np.asarray(hi))]


def build_config(raw: dict | None = None, overrides: dict | None = None) -> ExperimentConfig:
    """Validate ``raw`` merged over the defaults, then apply ``overrides``.

    ``overrides`` is a nested dict of flag values (None entries are ignored).
    """
    raw = raw or {}
    if not isinstance(raw, dict):
        raise ConfigError("<root>: config must be a JSON object")
    validate(raw)
    merged = _deep_merge(DEFAULTS, raw)
    if "space" in raw and "domain" not in raw:
        merged["domain"] = _default_domain(SpaceSpec.from_dict(raw["space"]))
    for sec, vals in (overrides or {}).items():
        if isinstance(vals, dict):
            merged.setdefault(sec, {}).update({k: v for k, v in vals.items() if v is not None})
        elif vals is not None:
            merged[sec] = vals
    merged["output"].setdefault("dir", os.environ.get(OUTPUT_ENV, "exitlab_out"))
    validate(merged)
    try:
        space = SpaceSpec.from_dict(merged["space"])
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"space: {exc}") from None
    try:
        domain = DomainSpec.from_dict(merged["domain"])
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"domain: {exc}") from None
    try:
        sim = SimConfig.from_dict(merged["simulate"])
    except ValueError as exc:
        raise ConfigError(f"simulate: {exc}") from None
    start = merged.get("start")
    if start is None:
        start = _default_start(space, domain)
        merged["start"] = start
    _check_start(space, domain, start)
    return ExperimentConfig(space, domain, start, sim, merged)


def _check_start(space: SpaceSpec, domain: DomainSpec, start) -> None:
    if space.variant == "gasket":
        if isinstance(start, int):
            return
        if len(start) != 2:
            raise ConfigError("start: gasket start needs 2 coordinates or a vertex index")
        return
    if isinstance(start, int):
        raise ConfigError("start: a vertex index is only meaningful on the gasket")
    if len(start) != space.coord_dim:
        raise ConfigError(f"start: expected {space.coord_dim} coordinates, got {len(start)}")
    if domain.variant == "gasket_subset":
        raise ConfigError("domain: gasket_subset needs a gasket space")
    if not bool(domain.contains(np.asarray(start, dtype=float)[None, :])[0]):
        raise ConfigError(f"start: {list(start)} lies outside the domain")


def load_config(path: str | None, overrides: dict | None = None) -> ExperimentConfig:
    raw = {}
    if path:
        try:
            with open(path) as fh:
                raw = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    return build_config(raw, overrides)
