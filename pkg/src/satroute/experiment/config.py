"""Experiment configuration: JSON in, validated dataclasses out."""
from __future__ import annotations

import copy
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import jsonschema

from ..agent.core import ExplorationSchedule
from ..agent.train import TrainConfig
from ..baselines import POLICY_KINDS
from ..constellation import (
    DEFAULT_GROUND_STATIONS, PRESETS, ConstellationConfig, GroundStation,
)
from ..simcore.params import SimParams

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "satroute experiment",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "constellation": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "preset": {"enum": sorted(PRESETS)},
                "plane_count": {"type": "integer", "minimum": 2},
                "sats_per_plane": {"type": "integer", "minimum": 3},
                "altitude": _pos,
                "inclination": {"type": "number", "exclusiveMinimum": 0, "maximum": 180},
                "beam_half_angle": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 90},
                "phasing_offset": _num,
            },
        },
        "ground_stations": {
            "type": "array", "minItems": 1,
            "items": {
                "type": "object", "additionalProperties": False,
                "required": ["name", "latitude", "longitude"],
                "properties": {
                    "name": {"type": "string"},
                    "latitude": {"type": "number", "minimum": -90, "maximum": 90},
                    "longitude": {"type": "number", "minimum": -180, "maximum": 180},
                },
            },
        },
        "policy": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "kind": {"enum": list(POLICY_KINDS)},
                "checkpoint": {"type": ["string", "null"]},
                "threshold": _pos,
                "retry_window": _pos,
            },
        },
        "policies": {
            "type": "array",
            "items": {"$ref": "#/properties/policy"},
        },
        "traffic": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "aggregate_rate": _pos,
                "compression_fraction": {"type": "number", "minimum": 0, "maximum": 1},
                "land_weight": _pos,
                "per_sat_rate": _pos,
                "observation_on_mean": _pos,
                "land_boxes": {"type": "array", "items": {"type": "array", "items": _num,
                                                          "minItems": 4, "maxItems": 4}},
            },
        },
        "failure": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "rate": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
                "mean_repair": _pos,
                "drop_on_link_failure": {"type": "boolean"},
            },
        },
        "sim": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "isl_rate": _pos, "downlink_rate": _pos, "compute_capacity": _pos, "storage": _pos,
                "rep_period": {"type": ["number", "null"], "exclusiveMinimum": 0},
                "detection_period": _pos, "q_c_cap": _pos,
                "storage_reserve": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
            },
        },
        "durations": {
            "type": "object", "additionalProperties": False,
            "properties": {"warmup": {"type": "number", "minimum": 0}, "measure": _pos,
                           "start_time": {"type": "number", "minimum": 0}},
        },
        "train": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "epochs": {"type": "integer", "minimum": 0},
                "epoch_duration": _pos,
                "grad_iters": {"type": "integer", "minimum": 0},
                "batch_size": {"type": "integer", "minimum": 1},
                "buffer_size": {"type": "integer", "minimum": 1},
                "lr": _pos, "gamma": {"type": "number", "minimum": 0, "maximum": 1},
                "target_period": {"type": "integer", "minimum": 1},
                "epsilon_start": {"type": "number", "minimum": 0, "maximum": 1},
                "epsilon_decay": {"type": "number", "minimum": 0, "maximum": 1},
                "epsilon_floor": {"type": "number", "minimum": 0, "maximum": 1},
                "heuristic": {"type": "number", "minimum": 0, "maximum": 1},
                "compute_prob": {"type": "number", "minimum": 0, "maximum": 1},
            },
        },
        "sweep": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "axis": {"enum": ["load", "failure_rate", "constellation"]},
                "values": {"type": "array", "minItems": 1},
            },
        },
        "seed": {"type": "integer", "minimum": 0},
        "output_dir": {"type": "string"},
    },
}


class ConfigError(ValueError):
    pass


@dataclass
class PolicySpec:
    kind: str = "isatcr"
    checkpoint: str | None = None
    threshold: float = 2.0
    retry_window: float = 2.0


@dataclass
class ExperimentConfig:
    constellation: ConstellationConfig = field(default_factory=lambda: PRESETS["paper-walker-12x24"])
    ground_stations: tuple = DEFAULT_GROUND_STATIONS
    policy: PolicySpec = field(default_factory=PolicySpec)
    policies: list = field(default_factory=list)
    sim: SimParams = field(default_factory=SimParams)
    warmup: float = 120.0
    measure: float = 600.0
    start_time: float = 0.0
    train: TrainConfig = field(default_factory=TrainConfig)
    sweep_axis: str | None = None
    sweep_values: list = field(default_factory=list)
    seed: int = 0
    output_dir: str = "out"
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def horizon(self) -> float:
        return self.warmup + self.measure

    def policy_list(self) -> list[PolicySpec]:
        return list(self.policies) if self.policies else [self.policy]

    def with_updates(self, **kw) -> "ExperimentConfig":
        new = copy.deepcopy(self)
        for k, v in kw.items():
            setattr(new, k, v)
        return new


def _validate(data: dict):
    try:
        jsonschema.validate(data, SCHEMA)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{path}: {exc.message}") from None


def config_from_dict(data: dict) -> ExperimentConfig:
    _validate(data)
    cfg = ExperimentConfig(raw=copy.deepcopy(data))

    c = dict(data.get("constellation", {}))
    preset = c.pop("preset", None)
    base = PRESETS[preset] if preset else PRESETS["paper-walker-12x24"]
    try:
        cfg.constellation = ConstellationConfig(**{**asdict(base), **c})
    except ValueError as exc:
        raise ConfigError(f"constellation: {exc}") from None

    if "ground_stations" in data:
        cfg.ground_stations = tuple(GroundStation(**g) for g in data["ground_stations"])
    if "policy" in data:
        cfg.policy = PolicySpec(**data["policy"])
    cfg.policies = [PolicySpec(**p) for p in data.get("policies", [])]

    sim_kw = dict(data.get("sim", {}))
    t = data.get("traffic", {})
    for key in ("aggregate_rate", "compression_fraction", "land_weight", "per_sat_rate", "observation_on_mean"):
        if key in t:
            sim_kw[key] = t[key]
    if "land_boxes" in t:
        sim_kw["land_boxes"] = tuple(tuple(b) for b in t["land_boxes"])
    f = data.get("failure", {})
    if "rate" in f:
        sim_kw["failure_rate"] = f["rate"]
    if "mean_repair" in f:
        sim_kw["mean_repair"] = f["mean_repair"]
    if "drop_on_link_failure" in f:
        sim_kw["drop_on_link_failure"] = f["drop_on_link_failure"]
    try:
        cfg.sim = SimParams(**sim_kw)
    except ValueError as exc:
        raise ConfigError(f"sim: {exc}") from None

    d = data.get("durations", {})
    cfg.warmup = float(d.get("warmup", cfg.warmup))
    cfg.measure = float(d.get("measure", cfg.measure))
    cfg.start_time = float(d.get("start_time", cfg.start_time))
    if cfg.warmup >= cfg.horizon:
        raise ConfigError("durations: warmup must be shorter than the measurement horizon")

    tr = dict(data.get("train", {}))
    sched = ExplorationSchedule(
        start=tr.pop("epsilon_start", 0.9), decay=tr.pop("epsilon_decay", 0.999),
        floor=tr.pop("epsilon_floor", 0.02), heuristic=tr.pop("heuristic", 0.5),
        compute_prob=tr.pop("compute_prob", 0.3))
    cfg.train = TrainConfig(**tr, schedule=sched, seed=data.get("seed", 0))

    sw = data.get("sweep", {})
    cfg.sweep_axis = sw.get("axis")
    cfg.sweep_values = list(sw.get("values", []))
    cfg.seed = int(data.get("seed", 0))
    cfg.output_dir = data.get("output_dir", "out")
    return cfg


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return config_from_dict(data)


def write_schema(path):
    Path(path).write_text(json.dumps(SCHEMA, indent=2) + "\n")
