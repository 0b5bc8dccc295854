"""Run configuration: one place for every experiment hyper-parameter.

Defaults are the published operating point of the defense: m_pc=1024,
t_iou=1e-6, alpha_fl=1, gamma_fl=2, beta=1e-3, B=0.5, c_conf=0.5, c_iou=0.5.
A config file (same JSON format as everything else) can override any field,
and CLI flags override the file.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field, fields

from .grid import GridSpec
from .lop import TrainConfig
from .synth import SynthConfig


@dataclass(frozen=True)
class DefenseConfig:
    method: str = "lop"  # lop | srs | sor | carlo-fsd | carlo-lpd | none
    boundary: float = 0.5  # B, vote-ratio cutoff
    beta: float = 1e-3  # pillar-box IoU threshold
    include_empty: bool = False  # ablation: count empty pillars in the vote
    srs_m: int = 500
    sor_k: int = 2
    sor_alpha: float = 1.1
    carlo_cell: float = 0.25
    carlo_r: float = 0.7


@dataclass(frozen=True)
class AttackConfig:
    method: str = "physical"  # physical | random | adaptive
    n_points: int = 200
    pgd_steps: int = 40
    pgd_step_size: float = 0.05
    donor_max_points: int = 200


@dataclass(frozen=True)
class MetricsConfig:
    c_conf: float = 0.5
    c_iou: float = 0.5


@dataclass(frozen=True)
class DetectorConfig:
    min_points: int = 8
    gate: float = 2.0
    confirm_hits: int = 6
    drop_misses: int = 60


@dataclass(frozen=True)
class RunConfig:
    grid: GridSpec = field(default_factory=GridSpec)
    train: TrainConfig = field(default_factory=TrainConfig)
    t_iou: float = 1e-6
    max_neg_ratio: float = 1.5
    defense: DefenseConfig = field(default_factory=DefenseConfig)
    attack: AttackConfig = field(default_factory=AttackConfig)
    metrics: MetricsConfig = field(default_factory=MetricsConfig)
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    synth: SynthConfig = field(default_factory=SynthConfig)
    seed: int = 0
    threads: int = 1


_SECTIONS = {
    "grid": GridSpec,
    "train": TrainConfig,
    "defense": DefenseConfig,
    "attack": AttackConfig,
    "metrics": MetricsConfig,
    "detector": DetectorConfig,
    "synth": SynthConfig,
}


def _to_jsonable(value):
    if isinstance(value, tuple):
        return list(value)
    if dataclasses.is_dataclass(value):
        return {f.name: _to_jsonable(getattr(value, f.name)) for f in fields(value)}
    return value


def config_to_dict(cfg: RunConfig) -> dict:
    return _to_jsonable(cfg)


def config_from_dict(doc: dict) -> RunConfig:
    kwargs = {}
    for f in fields(RunConfig):
        if f.name not in doc:
            continue
        value = doc[f.name]
        if f.name in _SECTIONS:
            cls = _SECTIONS[f.name]
            sub = {}
            for sf in fields(cls):
                if sf.name in value:
                    v = value[sf.name]
                    if isinstance(v, list):
                        v = tuple(v)
                    if sf.name == "grid" and isinstance(v, dict):
                        v = GridSpec(**v)
                    sub[sf.name] = v
            kwargs[f.name] = cls(**sub)
        else:
            kwargs[f.name] = value
    return RunConfig(**kwargs)


def load_config(path) -> RunConfig:
    with open(path) as fh:
        return config_from_dict(json.load(fh))


def save_config(cfg: RunConfig, path) -> None:
    with open(path, "w") as fh:
        json.dump(config_to_dict(cfg), fh, indent=2, sort_keys=True)
        fh.write("\n")
