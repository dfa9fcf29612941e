"""Training configuration: hyperparameters and ablation switches."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, fields
from pathlib import Path

from .errors import ConfigError
from .graph import FUSION_MODES


@dataclass
class TrainConfig:
    # sizes
    hidden: int = 64
    encoder_layers: int = 2
    encoder_heads: int = 4
    memory_size: int = 64
    width_dim: int = 25
    max_span: int = 10
    vocab_size: int = 2000
    graph_layers: int = 1
    semantic_k: int = 4
    # optimisation
    stage1_epochs: int = 18
    stage2_epochs: int = 12
    batch_size: int = 8
    peak_lr: float = 5e-5
    warmup_fraction: float = 0.1
    # joint gradient-norm cap before each Adam step; 0 disables clipping
    grad_clip: float = 1.0
    dropout: float = 0.5
    neg_entity_count: int = 100
    neg_relation_count: int = 100
    # inference
    relation_threshold: float = 0.5
    trigger_top_k: int = 5
    # memory flow attention switches
    subword_mfa: bool = True
    word_mfa: bool = True
    entity_flow: bool = True
    relation_flow: bool = True
    trigger_sensor: bool = True
    fusion_mode: str = "weighted"
    # keep the mean inverse-read weight at 1 instead of n_slots / positions
    mfa_rescale: bool = True
    # which reads pass gradients back into the memory slots in stage 2
    trigger_sensor_grad: bool = True
    subword_mfa_grad: bool = True
    word_mfa_grad: bool = True
    seed: int = 0
    fail_fast: bool = True

    def __post_init__(self):
        self.validate()

    @property
    def total_epochs(self) -> int:
        return self.stage1_epochs + self.stage2_epochs

    def validate(self) -> None:
        problems = []
        for name in ("stage1_epochs", "stage2_epochs", "neg_entity_count", "neg_relation_count"):
            if getattr(self, name) < 0:
                problems.append(f"{name} must be >= 0")
        for name in ("hidden", "encoder_layers", "encoder_heads", "memory_size", "width_dim",
                     "max_span", "vocab_size", "graph_layers", "batch_size", "trigger_top_k"):
            if getattr(self, name) < 1:
                problems.append(f"{name} must be >= 1")
        if self.hidden % self.encoder_heads:
            problems.append("hidden must be divisible by encoder_heads")
        if not 0.0 <= self.relation_threshold <= 1.0:
            problems.append("relation_threshold must be in [0, 1]")
        if self.grad_clip < 0:
            problems.append("grad_clip must be >= 0")
        if not 0.0 <= self.dropout < 1.0:
            problems.append("dropout must be in [0, 1)")
        if not 0.0 < self.warmup_fraction < 1.0:
            problems.append("warmup_fraction must be in (0, 1)")
        if self.fusion_mode not in FUSION_MODES:
            problems.append(f"fusion_mode must be one of {FUSION_MODES}")
        if (self.subword_mfa or self.word_mfa) and not (self.entity_flow or self.relation_flow):
            problems.append("memory flow attention enabled with both memory flows disabled")
        if problems:
            raise ConfigError("; ".join(problems))

    def degraded(self) -> bool:
        """A stage split that skips one stage entirely."""
        return self.stage1_epochs == 0 or self.stage2_epochs == 0

    def to_json(self) -> dict:
        return dataclasses.asdict(self)

    def replace(self, **changes) -> "TrainConfig":
        return from_mapping({**self.to_json(), **changes})


def from_mapping(values: dict) -> TrainConfig:
    known = {f.name: f for f in fields(TrainConfig)}
    unknown = sorted(set(values) - set(known))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    typed = {}
    for key, value in values.items():
        default = known[key].default
        if isinstance(default, bool):
            if not isinstance(value, bool):
                raise ConfigError(f"config key {key} expects a boolean")
        elif isinstance(default, int):
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError(f"config key {key} expects an integer")
        elif isinstance(default, float):
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"config key {key} expects a number")
            value = float(value)
        elif isinstance(default, str) and not isinstance(value, str):
            raise ConfigError(f"config key {key} expects a string")
        typed[key] = value
    return TrainConfig(**typed)


def load_config(path) -> TrainConfig:
    try:
        values = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if not isinstance(values, dict):
        raise ConfigError("config file must hold a JSON object")
    return from_mapping(values)


# Desk-scale overfit run on the synthetic corpus: 6 + 4 epochs at h = 64.
DESK = {
    "stage1_epochs": 6,
    "stage2_epochs": 4,
    "batch_size": 1,
    "peak_lr": 5e-3,
    "dropout": 0.2,
    "neg_entity_count": 20,
}

# Full-size encoder and memory dimensions for benchmark-scale runs.
BENCHMARK = {
    "hidden": 768,
    "memory_size": 768,
    "encoder_heads": 12,
}

PRESETS = {"default": {}, "desk": DESK, "benchmark": BENCHMARK}


def preset(name: str, **overrides) -> TrainConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return from_mapping({**PRESETS[name], **overrides})
