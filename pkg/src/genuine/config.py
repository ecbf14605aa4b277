"""Flat key=value experiment configuration files.

One typed value per line, '#' comments, unknown keys rejected outright so a
typo cannot silently fall back to a default. Lists are comma-separated.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, fields

from .model import VARIANTS
from .synth import SyntheticSpec

OUTPUT_DIR_ENV = "GENUINE_OUTPUT_DIR"


class ConfigError(ValueError):
    pass


def _parse_bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("true", "yes", "1"):
        return True
    if low in ("false", "no", "0"):
        return False
    raise ConfigError(f"expected a boolean, got {raw!r}")


def _parse_scalar(raw: str, kind):
    try:
        if kind is bool:
            return _parse_bool(raw)
        return kind(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"expected {kind.__name__}, got {raw!r}") from exc


def _parse_list(raw: str, kind) -> list:
    raw = raw.strip()
    if not raw:
        return []
    return [_parse_scalar(part.strip(), kind) for part in raw.split(",")]


@dataclass
class ExperimentConfig:
    dataset: str = ""                    # path to a .jsonl record file, or ...
    synth_spec: str = ""                 # ... path to a synthetic spec file
    graph_kind: str = "dpt"
    variant: str = "full"
    num_layers: int = 2
    keep_ratio: float = 0.5
    hidden_dim: int = 16
    clf_hidden: int = 16
    base_nodes: int = 0                  # 0 = derive from the training data
    lr: float = 0.01
    batch_size: int = 16
    max_epochs: int = 150
    patience: int = 30
    train_fraction: float = 0.6
    val_fraction: float = 0.1
    test_fraction: float = 0.3
    run_seeds: list[int] = field(default_factory=lambda: [101, 102, 103, 104, 105])
    noise_ratios: list[float] = field(default_factory=lambda: [
        0.0, 0.001, 0.003, 0.005, 0.01, 0.02, 0.03, 0.04])
    train_fractions: list[float] = field(default_factory=lambda: [
        0.1, 0.2, 0.3, 0.4, 0.5, 0.6])
    noise_seed: int = 999
    nograph_use_embeddings: bool = True
    scaling_node_counts: list[int] = field(default_factory=lambda: [
        10, 25, 50, 100, 200, 350, 500])
    scaling_densities: list[float] = field(default_factory=lambda: [
        0.1, 0.25, 0.5, 0.75, 1.0])
    scaling_fixed_density: float = 0.2
    scaling_fixed_nodes: int = 100
    scaling_graphs: int = 6
    scaling_epochs: int = 2
    output_dir: str = "out"

    def validate(self):
        if bool(self.dataset) == bool(self.synth_spec):
            raise ConfigError("exactly one of 'dataset' or 'synth_spec' must be set")
        if self.graph_kind not in ("dpt", "ntg"):
            raise ConfigError(f"graph_kind must be dpt or ntg, got {self.graph_kind!r}")
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if not self.run_seeds:
            raise ConfigError("run_seeds must not be empty")
        total = self.train_fraction + self.val_fraction + self.test_fraction
        if abs(total - 1.0) > 1e-9:
            raise ConfigError(f"split fractions must sum to 1, got {total!r}")

    def resolved_output_dir(self) -> str:
        return os.environ.get(OUTPUT_DIR_ENV, self.output_dir)


_LIST_FIELDS = {"run_seeds": int, "noise_ratios": float, "train_fractions": float,
                "scaling_node_counts": int, "scaling_densities": float}


def _read_kv(path) -> dict[str, str]:
    pairs = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
            key, _, value = line.partition("=")
            key = key.strip()
            if key in pairs:
                raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
            pairs[key] = value.strip()
    return pairs


def _populate(cls, pairs: dict[str, str], path):
    valid = {f.name: f.type for f in fields(cls)}
    obj = cls()
    for key, raw in pairs.items():
        if key not in valid:
            raise ConfigError(f"{path}: unknown key {key!r}")
        if key in _LIST_FIELDS:
            setattr(obj, key, _parse_list(raw, _LIST_FIELDS[key]))
            continue
        current = getattr(obj, key)
        kind = type(current) if current is not None else str
        setattr(obj, key, _parse_scalar(raw, kind))
    return obj


def load_experiment_config(path) -> ExperimentConfig:
    cfg = _populate(ExperimentConfig, _read_kv(path), path)
    cfg.validate()
    return cfg


_SYNTH_FIELDS = {f.name for f in fields(SyntheticSpec)}


def load_synth_spec(path) -> SyntheticSpec:
    pairs = _read_kv(path)
    kwargs = {}
    for key, raw in pairs.items():
        if key not in _SYNTH_FIELDS:
            raise ConfigError(f"{path}: unknown key {key!r}")
        if key == "embedding_dim" and raw.lower() in ("none", ""):
            kwargs[key] = None
        elif key in ("signal_strength", "noise_scale"):
            kwargs[key] = _parse_scalar(raw, float)
        else:
            kwargs[key] = _parse_scalar(raw, int)
    spec = SyntheticSpec(**kwargs)
    spec.validate()
    return spec
