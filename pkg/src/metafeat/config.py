"""Per-command experiment configuration: defaults, file overrides, validation."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import yaml


class ConfigError(ValueError):
    pass


@dataclass
class GenToyConfig:
    count: int = 300
    subsample: int | None = 200
    seed: int = 0


@dataclass
class TrainCommandConfig:
    manifest: str = ""
    fold: int = 0
    folds: int = 5
    steps: int = 10_000
    pairs_per_step: int = 16
    lr: float = 1e-3
    gamma: float = 1.0
    architecture: str = "toy"
    output_activation: str = "relu"
    eval_every: int = 500
    n_val_pairs: int = 400
    valid_fraction: float = 0.1
    seed: int = 0


@dataclass
class EvalConfig:
    manifest: str = ""
    checkpoint: str | None = None
    split: str | None = None
    fold: int | None = None
    folds: int = 5
    n_pairs: int = 2000
    threshold: float = 0.5
    gamma: float | None = None
    baseline: str = "none"
    architecture: str = "toy"
    seed: int = 0


@dataclass
class ExtractConfig:
    manifest: str = ""
    checkpoint: str | None = None
    batches: int = 10
    architecture: str = "toy"
    seed: int = 0


@dataclass
class EmbedConfig:
    features: str = ""
    manifest: str | None = None
    seed: int = 0


@dataclass
class SynthConfig:
    count: int = 50
    subsample: int | None = 200
    seed: int = 0


@dataclass
class HpoConfig:
    corpus: str = ""
    checkpoint: str | None = None
    methods: list = field(default_factory=lambda: ["random", "gp", "warmstart-d2v",
                                                   "warmstart-mf1"])
    seeds: int = 10
    budget: int = 20
    n_init: int = 5
    n_neighbors: int = 3
    batches: int = 10
    seed: int = 0


COMMAND_CONFIGS = {
    "gen-toy": GenToyConfig,
    "train": TrainCommandConfig,
    "eval-pairs": EvalConfig,
    "extract": ExtractConfig,
    "embed-mds": EmbedConfig,
    "synth-surrogate": SynthConfig,
    "hpo": HpoConfig,
}

_TYPES = {"int": int, "float": (int, float), "str": str, "list": list}


def _check(name: str, value, annotation: str, section: str):
    if value is None:
        if "None" in annotation:
            return None
        raise ConfigError(f"{section}.{name}: value is required")
    base = annotation.replace(" | None", "").strip()
    expected = _TYPES.get(base)
    if expected is None:
        return value
    if isinstance(value, bool) or not isinstance(value, expected):
        raise ConfigError(f"{section}.{name}: expected {base}, got {type(value).__name__}")
    return float(value) if base == "float" else value


def load_config_file(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err
    doc = yaml.safe_load(text) if path.suffix in (".yaml", ".yml") else json.loads(text)
    if doc is None:
        return {}
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return doc


def resolve(command: str, file_doc: dict | None, overrides: dict):
    """Defaults < config file < explicit command-line values."""
    cls = COMMAND_CONFIGS[command]
    known = {f.name: f for f in fields(cls)}
    merged = {}
    doc = dict(file_doc or {})
    # a file may hold several commands' sections keyed by command name
    if command in doc and isinstance(doc[command], dict):
        doc = {**{k: v for k, v in doc.items() if k not in COMMAND_CONFIGS}, **doc[command]}
    doc = {k: v for k, v in doc.items() if k not in COMMAND_CONFIGS}
    for key, value in doc.items():
        if key not in known:
            raise ConfigError(f"{command}.{key}: unknown field")
        merged[key] = value
    merged.update({k: v for k, v in overrides.items() if v is not None})
    cfg = cls(**merged)
    for name, f in known.items():
        setattr(cfg, name, _check(name, getattr(cfg, name), str(f.type), command))
    return cfg


def write_resolved(cfg, command: str, path) -> None:
    with open(path, "w") as fh:
        json.dump({"command": command, **asdict(cfg)}, fh, indent=2, sort_keys=True)
        fh.write("\n")
