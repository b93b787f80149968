"""Experiment configuration: JSON file, dotted-key overrides, defaults, builders."""

from __future__ import annotations

import copy
import json
import os
from pathlib import Path
from typing import Any, Mapping

from ..discretization import Grid
from ..fields import VectorFieldSystem, builtin_system, system_from_table

__all__ = [
    "KINDS",
    "DEFAULTS",
    "ConfigError",
    "load_config",
    "apply_override",
    "parse_override",
    "effective_config",
    "build_system",
    "build_grid",
]

KINDS = (
    "operator-check",
    "kernel-check",
    "picard",
    "simulate",
    "blowup-scan",
    "functional-scan",
    "exponent-table",
    "weak-residual",
)


class ConfigError(ValueError):
    pass


_COMMON = {"seed": 0, "workers": None}

DEFAULTS: dict[str, dict[str, Any]] = {
    "operator-check": {
        "system": {"tag": "euclidean", "n": 1},
        "grid": {"half_width": 2.0, "points": 9},
        "levels": 3,
        "probe": None,
        "tolerances": {"order": 0.2},
        "export_operator": False,
    },
    "kernel-check": {
        "system": {"tag": "euclidean", "n": 1},
        "grid": {"half_width": 10.0, "points": 401},
        "times": [0.25, 0.5, 1.0],
        "probes": 3,
        "defect_pairs": 5,
        "tolerances": {"defect": 1e-8, "mass": None, "gaussian": 1e-2},
    },
    "picard": {
        "system": {"tag": "euclidean", "n": 1},
        "grid": {"half_width": 8.0, "points": 201},
        "p": 2.0,
        "T": "auto",
        "J": 64,
        "tol": 1e-10,
        "q_star": 0.5,
        "forcing": {"kind": "gaussian-bump", "eps": 0.05},
        "initial": {"kind": "gaussian", "amplitude": 0.2},
        "tolerances": {"rate": 0.6, "residual": 1e-8, "uniqueness": 1e-7},
    },
    "simulate": {
        "system": {"tag": "euclidean", "n": 1},
        "grid": {"half_width": 8.0, "points": 161},
        "p": 2.0,
        "horizon": 1.0,
        "dt0": 2.5e-3,
        "blowup": 1e8,
        "forcing": {"kind": "zero"},
        "initial": {"kind": "gaussian", "amplitude": 0.2},
        "compare_picard": True,
        "J": 64,
        "record": [0.25, 0.5, 0.75, 1.0],
        "tolerances": {"cross": 1e-3, "boundary": 1e-3},
    },
    "blowup-scan": {
        "system": {"tag": "euclidean", "n": 3},
        "grid": {"half_width": 12.0, "points": 31},
        "p": 1.5,
        "forcing": {"kind": "power-tail", "lambda": 2.0},
        "initial": {"kind": "zero"},
        "eps": [0.05, 0.1, 0.2, 0.4],
        "dt0": 0.5,
        "blowup": 1e8,
        "horizon": 400.0,
        "tolerances": {"bound_factor": 1.1, "uncertainty": 0.05},
    },
    "functional-scan": {
        "family": "constant",
        "system": {"tag": "constant", "matrix": [[1.0, 0.0], [0.0, 1.0]]},
        "p": 1.5,
        "T": [100.0, 562.341325190349, 3162.2776601683795, 17782.794100389227, 100000.0],
        "R": None,
        "kappa": None,
        "forcing": None,
        "tolerances": {"slope": 0.05},
    },
    "exponent-table": {
        "n": 3,
        "constant_n": 4,
        "grushin_k": 2,
        "engel_n": 3,
        "p": [1.2, 1.5, 2.0],
    },
    "weak-residual": {
        "system": {"tag": "euclidean", "n": 1},
        "half_width": 8.0,
        "p": 2.0,
        "T": 4.0,
        "family": "parabolic",
        "ladder": [[79, 32], [159, 64], [319, 128]],
        "forcing": {"kind": "gaussian-bump", "eps": 0.01},
        "initial": {"kind": "gaussian", "amplitude": 0.1},
        "tolerances": {"order": 1.0},
    },
}


def load_config(path: str | os.PathLike | None) -> dict:
    if path is None:
        return {}
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as err:
        raise ConfigError(f"{path}: invalid JSON ({err})") from err
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return data


def parse_override(text: str) -> tuple[list[str], Any]:
    """``a.b=1.5`` -> (["a", "b"], 1.5); values parse as JSON, else stay strings."""
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not key=value")
    key, raw = text.split("=", 1)
    parts = key.strip().split(".")
    if not all(parts):
        raise ConfigError(f"bad override key {key!r}")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return parts, value


def apply_override(cfg: dict, parts: list[str], value: Any) -> None:
    node = cfg
    for key in parts[:-1]:
        nxt = node.get(key)
        if not isinstance(nxt, dict):
            nxt = {}
            node[key] = nxt
        node = nxt
    node[parts[-1]] = value


def _merge(base: dict, extra: Mapping) -> dict:
    out = copy.deepcopy(base)
    for k, v in extra.items():
        if isinstance(v, Mapping) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def effective_config(kind: str, raw: Mapping | None = None, overrides: list[str] = ()) -> dict:
    """Defaults for ``kind`` merged with the file contents and then the overrides."""
    if kind not in KINDS:
        raise ConfigError(f"unknown experiment {kind!r}; expected one of {KINDS}")
    raw = dict(raw or {})
    declared = raw.pop("experiment", kind)
    if declared != kind:
        raise ConfigError(f"config declares experiment {declared!r} but {kind!r} was requested")
    cfg = _merge({**_COMMON, **DEFAULTS[kind]}, raw)
    for text in overrides:
        apply_override(cfg, *parse_override(text))
    cfg["experiment"] = kind
    if cfg.get("workers") is None:
        cfg["workers"] = os.cpu_count() or 1
    if "system" in cfg:
        build_system(cfg["system"])
    return cfg


def build_system(spec: Mapping) -> VectorFieldSystem:
    spec = dict(spec)
    if "table" in spec:
        return system_from_table(spec["table"], spec.get("tag", "custom"))
    tag = spec.get("tag")
    if tag is None:
        raise ConfigError("system spec needs a 'tag' or a 'table'")
    try:
        return builtin_system(tag, n=spec.get("n"), k=int(spec.get("k", 1)), matrix=spec.get("matrix"))
    except ValueError as err:
        raise ConfigError(str(err)) from err


def build_grid(spec: Mapping, n: int) -> Grid:
    hw = spec.get("half_width", 1.0)
    pts = spec.get("points", 9)
    hw = [float(hw)] * n if not isinstance(hw, (list, tuple)) else [float(v) for v in hw]
    pts = [int(pts)] * n if not isinstance(pts, (list, tuple)) else [int(v) for v in pts]
    if len(hw) != n or len(pts) != n:
        raise ConfigError(f"grid spec has wrong dimension for n={n}")
    return Grid(tuple(hw), tuple(pts))
