"""Training configuration: defaults, JSON round-trip, validation.

Defaults follow the reference experimental setup: 64-dim tables, batch 1024,
fan-in 64, five similarity positives/negatives, lr 1e-4, lambda1 1e-4,
lambda2 1e-5.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass

from .errors import ConfigError


@dataclass
class TrainConfig:
    d0: int = 64
    d1: int = 64
    d2: int = 64
    d3: int = 64
    batch_size: int = 1024
    fan_in: int = 64
    num_pos: int = 5
    num_neg: int = 5
    lambda1: float = 1e-4
    lambda2: float = 1e-5
    learning_rate: float = 1e-4
    max_epochs: int = 400
    eval_every: int = 10
    patience: int = 5
    seed: int = 42
    k: int = 20
    leaky_slope: float = 0.2
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    no_similarity: bool = False
    no_adaptive_margin: bool = False
    detach_margin: bool = True
    warmup_fan_in: int | None = None  # None = full first-hop neighborhood
    retry_limit: int = 100
    log_every: int = 100
    sparse_adam: bool = True
    lazy_l2: bool = False  # True: L2 grads only on batch-touched embedding rows

    @property
    def dims(self) -> tuple[int, int, int, int]:
        return (self.d0, self.d1, self.d2, self.d3)

    def replace(self, **kwargs) -> "TrainConfig":
        return dataclasses.replace(self, **kwargs)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self, path: str):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


_FIELD_TYPES = {f.name: f for f in dataclasses.fields(TrainConfig)}


def validate(cfg: TrainConfig) -> list[str]:
    """Return every constraint violation (empty list = valid)."""
    problems = []
    for name in ("d0", "d1", "d2", "d3", "batch_size", "fan_in", "retry_limit", "k"):
        if getattr(cfg, name) < 1:
            problems.append(f"{name} must be >= 1, got {getattr(cfg, name)}")
    for name in ("num_pos", "num_neg", "max_epochs", "patience", "log_every"):
        if getattr(cfg, name) < 0:
            problems.append(f"{name} must be >= 0, got {getattr(cfg, name)}")
    for name in ("lambda1", "lambda2"):
        if getattr(cfg, name) < 0:
            problems.append(f"{name} must be >= 0, got {getattr(cfg, name)}")
    if cfg.learning_rate <= 0:
        problems.append(f"learning_rate must be > 0, got {cfg.learning_rate}")
    if cfg.eval_every < 1:
        problems.append(f"eval_every must be >= 1, got {cfg.eval_every}")
    if not (0 <= cfg.beta1 < 1) or not (0 <= cfg.beta2 < 1):
        problems.append(f"beta1/beta2 must lie in [0, 1), got {cfg.beta1}/{cfg.beta2}")
    if cfg.eps <= 0:
        problems.append(f"eps must be > 0, got {cfg.eps}")
    if not (0 <= cfg.leaky_slope < 1):
        problems.append(f"leaky_slope must lie in [0, 1), got {cfg.leaky_slope}")
    if cfg.warmup_fan_in is not None and cfg.warmup_fan_in < 1:
        problems.append(f"warmup_fan_in must be >= 1 or null, got {cfg.warmup_fan_in}")
    return problems


def from_dict(data: dict, base: TrainConfig | None = None) -> TrainConfig:
    """Build a validated config; unknown keys and bad values are all reported."""
    cfg = base or TrainConfig()
    problems = [f"unknown field {k!r}" for k in data if k not in _FIELD_TYPES]
    fields = {}
    for name, value in data.items():
        if name not in _FIELD_TYPES:
            continue
        if name == "warmup_fan_in" and value is None:
            fields[name] = None
            continue
        want = type(getattr(cfg, name))
        if want is float and isinstance(value, int) and not isinstance(value, bool):
            value = float(value)
        if want is int and isinstance(value, bool):
            problems.append(f"{name} must be {want.__name__}, got bool")
            continue
        if not isinstance(value, want) and not (name == "warmup_fan_in" and isinstance(value, int)):
            problems.append(f"{name} must be {want.__name__}, got {type(value).__name__}")
            continue
        fields[name] = value
    cfg = cfg.replace(**fields)
    problems.extend(validate(cfg))
    if problems:
        raise ConfigError(problems)
    return cfg


def load_config(path: str, base: TrainConfig | None = None) -> TrainConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError([f"{path}: {exc}"]) from exc
    if not isinstance(data, dict):
        raise ConfigError([f"{path}: top-level JSON value must be an object"])
    return from_dict(data, base=base)
