"""Scenario configuration: schema, defaults, validation and canonical digest.

Config files are JSON objects.  Every key is optional; unknown keys are
rejected so that a typo cannot silently fall back to a default.
"""
from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any

import numpy as np

from .channel import AMPLITUDE_MODELS
from .fusion import METHODS, SearchGrid
from .geometry import ArraySpec, RadarPairConfig


class ConfigError(ValueError):
    """Invalid scenario configuration; the message starts with the offending key."""


@dataclass(frozen=True)
class TargetRegion:
    x_min: float
    x_max: float
    y_min: float
    y_max: float


@dataclass(frozen=True)
class ScenarioConfig:
    pairs: tuple[RadarPairConfig, ...]
    n_targets: int
    target_region: TargetRegion
    min_separation: float
    grid: SearchGrid
    angle_step_deg: float
    amplitude_model: str
    exclusion_radius: float
    angle_exclusion_cells: int
    methods: tuple[str, ...]
    seed: int
    trials: int
    noiseless: bool = False
    oracle_budget: int = 2_000_000

    @property
    def angle_step(self) -> float:
        return float(np.deg2rad(self.angle_step_deg))

    def with_pair(self, index: int, **changes) -> "ScenarioConfig":
        """Copy with fields of one pair replaced (``tx_elements``/``rx_elements`` resize arrays)."""
        pair = self.pairs[index]
        if "tx_elements" in changes:
            changes["tx"] = replace(pair.tx, elements=changes.pop("tx_elements"))
        if "rx_elements" in changes:
            changes["rx"] = replace(pair.rx, elements=changes.pop("rx_elements"))
        pairs = list(self.pairs)
        pairs[index] = replace(pair, **changes)
        return replace(self, pairs=tuple(pairs))

    def with_subcarriers(self, Q: int) -> "ScenarioConfig":
        return replace(self, pairs=tuple(replace(p, subcarriers=Q) for p in self.pairs))


DEFAULT_PAIR = {
    "tx": {"origin": [-5.0, 0.0], "normal": [0.0, 1.0], "elements": 4},
    "rx": {"origin": [0.0, 0.0], "normal": [0.0, 1.0], "elements": 4},
    "subcarriers": 512,
    "subcarrier_spacing": 78125.0,
    "carrier_freq": 5.89e9,
    # 0 dB per pair for three unit-amplitude targets: sum_k A_k^2 / sigma^2 = 1
    "noise_variance": 3.0,
}

DEFAULTS: dict[str, Any] = {
    "seed": 0,
    "trials": 2000,
    "n_targets": 3,
    "target_region": {"x_min": -8.0, "x_max": 8.0, "y_min": 4.0, "y_max": 16.0},
    "min_separation": 1.5,
    "grid": {"x_min": -8.0, "x_max": 8.0, "y_min": 4.0, "y_max": 16.0, "step": 0.25},
    "angle_step_deg": 1.0,
    "amplitude_model": "unit",
    "exclusion_radius": 1.0,
    "angle_exclusion_cells": 2,
    "methods": list(METHODS),
    "noiseless": False,
    "oracle_budget": 2_000_000,
    "pairs": [
        dict(copy.deepcopy(DEFAULT_PAIR), pair_id=1),
        dict(copy.deepcopy(DEFAULT_PAIR), pair_id=2,
             tx={"origin": [5.0, 0.0], "normal": [0.0, 1.0], "elements": 4}),
    ],
}

_ARRAY_KEYS = {"origin", "normal", "elements"}
_PAIR_KEYS = {"pair_id", "tx", "rx", "subcarriers", "subcarrier_spacing", "carrier_freq", "noise_variance"}
_BOX_KEYS = {"x_min", "x_max", "y_min", "y_max"}


def _check_keys(obj, allowed, where):
    if not isinstance(obj, dict):
        raise ConfigError(f"{where}: expected an object")
    unknown = sorted(set(obj) - set(allowed))
    if unknown:
        raise ConfigError(f"{where + '.' if where else ''}{unknown[0]}: unknown key")


def _num(obj, key, where, positive=False, integer=False, nonneg=False):
    name = f"{where}.{key}" if where else key
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{name}: expected a number, got {v!r}")
    if integer and int(v) != v:
        raise ConfigError(f"{name}: expected an integer, got {v!r}")
    if not np.isfinite(v):
        raise ConfigError(f"{name}: must be finite")
    if positive and not v > 0:
        raise ConfigError(f"{name}: must be > 0, got {v!r}")
    if nonneg and v < 0:
        raise ConfigError(f"{name}: must be >= 0, got {v!r}")
    return int(v) if integer else float(v)


def _vec2(obj, key, where):
    v = obj[key]
    if not (isinstance(v, (list, tuple)) and len(v) == 2):
        raise ConfigError(f"{where}.{key}: expected two numbers")
    return [_num({"v": c}, "v", f"{where}.{key}") for c in v]


def _array(raw, where, default) -> ArraySpec:
    _check_keys(raw, _ARRAY_KEYS, where)
    d = {**default, **raw}
    origin = _vec2(d, "origin", where)
    normal = _vec2(d, "normal", where)
    norm = float(np.hypot(*normal))
    if norm == 0:
        raise ConfigError(f"{where}.normal: must be nonzero")
    elements = _num(d, "elements", where, positive=True, integer=True)
    return ArraySpec(tuple(origin), (normal[0] / norm, normal[1] / norm), elements)


def _pair(raw, where, index) -> RadarPairConfig:
    _check_keys(raw, _PAIR_KEYS, where)
    # partial entries inherit from the default pair in the same slot
    base = DEFAULTS["pairs"][index] if index < len(DEFAULTS["pairs"]) else DEFAULT_PAIR
    d = {**base, "pair_id": index + 1, **raw}
    return RadarPairConfig(
        tx=_array(d["tx"], f"{where}.tx", base["tx"]),
        rx=_array(d["rx"], f"{where}.rx", base["rx"]),
        subcarriers=_num(d, "subcarriers", where, positive=True, integer=True),
        subcarrier_spacing=_num(d, "subcarrier_spacing", where, positive=True),
        carrier_freq=_num(d, "carrier_freq", where, positive=True),
        noise_variance=_num(d, "noise_variance", where, positive=True),
        pair_id=_num(d, "pair_id", where, integer=True),
    )


def _box(raw, where, default):
    _check_keys(raw, _BOX_KEYS | ({"step"} if "step" in default else set()), where)
    d = {**default, **raw}
    vals = {k: _num(d, k, where, positive=(k == "step")) for k in d}
    if vals["x_max"] < vals["x_min"]:
        raise ConfigError(f"{where}.x_max: must be >= x_min")
    if vals["y_max"] < vals["y_min"]:
        raise ConfigError(f"{where}.y_max: must be >= y_min")
    return vals


def from_dict(raw: dict) -> ScenarioConfig:
    _check_keys(raw, DEFAULTS.keys(), "")
    d = {**DEFAULTS, **raw}
    pairs_raw = d["pairs"]
    if not isinstance(pairs_raw, list) or not pairs_raw:
        raise ConfigError("pairs: expected a nonempty list")
    pairs = tuple(_pair(p, f"pairs[{i}]", i) for i, p in enumerate(pairs_raw))
    if len({p.pair_id for p in pairs}) != len(pairs):
        raise ConfigError("pairs.pair_id: ids must be unique")
    K = _num(d, "n_targets", "", positive=True, integer=True)
    for i, p in enumerate(pairs):
        if K >= p.dim:
            raise ConfigError(f"n_targets: K={K} must be below M*N={p.dim} of pairs[{i}]")
    methods = d["methods"]
    if not isinstance(methods, list) or not methods:
        raise ConfigError("methods: expected a nonempty list")
    for m in methods:
        if m not in METHODS:
            raise ConfigError(f"methods: unknown method {m!r}")
    if d["amplitude_model"] not in AMPLITUDE_MODELS:
        raise ConfigError(f"amplitude_model: expected one of {AMPLITUDE_MODELS}")
    if not isinstance(d["noiseless"], bool):
        raise ConfigError("noiseless: expected true or false")
    seed = _num(d, "seed", "", integer=True, nonneg=True)
    if seed >= 2 ** 64:
        raise ConfigError("seed: must fit in 64 bits")
    region = _box(d["target_region"], "target_region", DEFAULTS["target_region"])
    grid = _box(d["grid"], "grid", DEFAULTS["grid"])
    return ScenarioConfig(
        pairs=pairs,
        n_targets=K,
        target_region=TargetRegion(**region),
        min_separation=_num(d, "min_separation", "", nonneg=True),
        grid=SearchGrid(**grid),
        angle_step_deg=_num(d, "angle_step_deg", "", positive=True),
        amplitude_model=d["amplitude_model"],
        exclusion_radius=_num(d, "exclusion_radius", "", nonneg=True),
        angle_exclusion_cells=_num(d, "angle_exclusion_cells", "", integer=True, nonneg=True),
        methods=tuple(methods),
        seed=seed,
        trials=_num(d, "trials", "", positive=True, integer=True),
        noiseless=d["noiseless"],
        oracle_budget=_num(d, "oracle_budget", "", positive=True, integer=True),
    )


def default_scenario(**overrides) -> ScenarioConfig:
    return from_dict(overrides)


def parse_scenario(path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc.strerror}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: invalid JSON in {path}: {exc}") from exc
    return from_dict(raw)


def _array_dict(a: ArraySpec) -> dict:
    return {"origin": list(a.origin), "normal": list(a.normal), "elements": a.elements}


def to_dict(cfg: ScenarioConfig) -> dict:
    g = cfg.grid
    return {
        "seed": cfg.seed,
        "trials": cfg.trials,
        "n_targets": cfg.n_targets,
        "target_region": vars(cfg.target_region).copy(),
        "min_separation": cfg.min_separation,
        "grid": {"x_min": g.x_min, "x_max": g.x_max, "y_min": g.y_min, "y_max": g.y_max, "step": g.step},
        "angle_step_deg": cfg.angle_step_deg,
        "amplitude_model": cfg.amplitude_model,
        "exclusion_radius": cfg.exclusion_radius,
        "angle_exclusion_cells": cfg.angle_exclusion_cells,
        "methods": list(cfg.methods),
        "noiseless": cfg.noiseless,
        "oracle_budget": cfg.oracle_budget,
        "pairs": [
            {
                "pair_id": p.pair_id,
                "tx": _array_dict(p.tx),
                "rx": _array_dict(p.rx),
                "subcarriers": p.subcarriers,
                "subcarrier_spacing": p.subcarrier_spacing,
                "carrier_freq": p.carrier_freq,
                "noise_variance": p.noise_variance,
            }
            for p in cfg.pairs
        ],
    }


def dumps(cfg: ScenarioConfig) -> str:
    return json.dumps(to_dict(cfg), sort_keys=True, indent=2) + "\n"


def write_scenario(cfg: ScenarioConfig, path) -> None:
    Path(path).write_text(dumps(cfg), encoding="utf-8")


def scenario_digest(cfg: ScenarioConfig) -> str:
    """SHA-256 of the canonical compact JSON form, first 16 hex digits.

    The seed and trial count are excluded: they are reported separately and
    do not change the simulated scenario.
    """
    d = to_dict(cfg)
    d.pop("seed")
    d.pop("trials")
    blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]
