"""Run configuration: JSON parsing and validation with field-path errors."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .convex import ConvexFn, function_from_spec
from .design import Bounds, GridSpec
from .simulate import DisturbanceModel
from .system import ConfigError, SystemLTI

DESIGN_MODES = ("rs", "qs", "qr", "quadratic")


def _require(d: dict, key: str, path: str):
    if key not in d:
        raise ConfigError(f"{path}.{key}: missing required field")
    return d[key]


def _number(v, path: str, positive: bool = False) -> float:
    if not isinstance(v, (int, float)) or isinstance(v, bool):
        raise ConfigError(f"{path}: expected a number, got {type(v).__name__}")
    if positive and not v > 0:
        raise ConfigError(f"{path}: must be positive")
    return float(v)


def _matrix(v, path: str) -> np.ndarray:
    try:
        arr = np.asarray(v, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(f"{path}: expected a matrix (nested number lists)")
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    if not np.all(np.isfinite(arr)):
        raise ConfigError(f"{path}: entries must be finite")
    return arr


def _function(spec, path: str) -> ConvexFn:
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError(f"{path}: expected a function spec with a 'kind' field")
    try:
        return function_from_spec(spec)
    except (ValueError, KeyError) as e:
        raise ConfigError(f"{path}: {e}")


@dataclass
class SimBlock:
    T: int = 100
    runs: int = 1
    models: list = field(default_factory=list)
    kick: float = 1.0   # w_0 injected before worst-case models (x_0 stays 0)


@dataclass
class RunConfig:
    system: SystemLTI
    mode: str
    functions: dict            # parsed ConvexFns by role
    raw_functions: dict        # original specs (for reports)
    shaping: np.ndarray | str | None   # M or G, or "search"
    bounds: Bounds | None
    gamma: float | None
    gamma_search: dict | None
    grids: GridSpec
    sim: SimBlock
    quad_weights: dict | None = None


def parse_config(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config: expected a JSON object")
    sys_block = _require(data, "system", "config")
    A = _matrix(_require(sys_block, "A", "config.system"), "config.system.A")
    B = _matrix(_require(sys_block, "B", "config.system"), "config.system.B")
    system = SystemLTI(A, B)

    design = _require(data, "design", "config")
    mode = _require(design, "mode", "config.design")
    if mode not in DESIGN_MODES:
        raise ConfigError(f"config.design.mode: expected one of {DESIGN_MODES}, got {mode!r}")

    functions = {}
    raw = {}
    quad_weights = None
    shaping = None
    if mode == "quadratic":
        quad_weights = {}
        for key in ("Q", "R", "S"):
            quad_weights[key] = _matrix(_require(design, key, "config.design"), f"config.design.{key}")
    else:
        needed = {"rs": ("r", "s"), "qs": ("q", "s"), "qr": ("q", "r")}[mode]
        for key in needed:
            spec = _require(design, key, "config.design")
            functions[key] = _function(spec, f"config.design.{key}")
            raw[key] = spec
        shaping_key = "G" if mode == "qr" else "M"
        shaping = _require(design, shaping_key, "config.design")
        if shaping != "search":
            shaping = _matrix(shaping, f"config.design.{shaping_key}")

    bounds = None
    if "bounds" in design:
        bl = design["bounds"]
        if not isinstance(bl, dict):
            raise ConfigError("config.design.bounds: expected an object")
        known = {"L_r", "U_r", "L_s", "U_s", "L_q", "U_q"}
        bad = set(bl) - known
        if bad:
            raise ConfigError(f"config.design.bounds: unknown fields {sorted(bad)}")
        bounds = Bounds(**{k: _number(v, f"config.design.bounds.{k}", positive=True) for k, v in bl.items()})

    gamma = None
    gamma_search = None
    gv = _require(data, "gamma", "config")
    if isinstance(gv, dict):
        gamma_search = {
            "tol": _number(gv.get("tol", 1e-4), "config.gamma.tol", positive=True),
            "margin": _number(gv.get("margin", 1.5), "config.gamma.margin", positive=True),
        }
        if gamma_search["margin"] <= 1.0:
            raise ConfigError("config.gamma.margin: must exceed 1 (a level strictly above the infimum)")
    else:
        gamma = _number(gv, "config.gamma", positive=True)

    gb = data.get("grids", {})
    if not isinstance(gb, dict):
        raise ConfigError("config.grids: expected an object")
    grids = GridSpec(
        envelope=_number(gb.get("envelope", 1.0), "config.grids.envelope", positive=True),
        points=int(_number(gb.get("points", 41), "config.grids.points", positive=True)),
        seed=int(_number(gb.get("seed", 0), "config.grids.seed") if "seed" in gb else 0),
    )

    sim = SimBlock()
    if "simulation" in data:
        sb = data["simulation"]
        if not isinstance(sb, dict):
            raise ConfigError("config.simulation: expected an object")
        sim.T = int(_number(sb.get("T", 100), "config.simulation.T", positive=True))
        sim.runs = int(_number(sb.get("runs", 1), "config.simulation.runs", positive=True))
        sim.kick = _number(sb.get("kick", 1.0), "config.simulation.kick")
        models = sb.get("models", [])
        if not isinstance(models, list):
            raise ConfigError("config.simulation.models: expected a list")
        for i, mspec in enumerate(models):
            path = f"config.simulation.models[{i}]"
            if not isinstance(mspec, dict) or "kind" not in mspec:
                raise ConfigError(f"{path}: expected an object with a 'kind' field")
            try:
                sim.models.append(DisturbanceModel(
                    kind=mspec["kind"],
                    scale=_number(mspec.get("scale", 1.0), f"{path}.scale"),
                    seed=int(_number(mspec.get("seed", 0), f"{path}.seed")),
                ))
            except ConfigError:
                raise
    return RunConfig(system=system, mode=mode, functions=functions, raw_functions=raw,
                     shaping=shaping, bounds=bounds, gamma=gamma, gamma_search=gamma_search,
                     grids=grids, sim=sim, quad_weights=quad_weights)


def load_config(path) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as e:
        raise ConfigError(f"config is not valid JSON: {e}")
    return parse_config(data)
