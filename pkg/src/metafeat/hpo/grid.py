"""Neural-network hyperparameter grid, its vector encoding and surrogate tables."""

from __future__ import annotations

import csv
import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

PAPER_GRID_SIZE = 3456


@dataclass(frozen=True)
class Axis:
    name: str
    kind: str  # "categorical" or "numeric"
    levels: tuple

    def encode(self, value) -> list[float]:
        if self.kind == "categorical":
            return [1.0 if value == lv else 0.0 for lv in self.levels]
        lo, hi = float(min(self.levels)), float(max(self.levels))
        return [(float(value) - lo) / (hi - lo) if hi > lo else 0.0]


DEFAULT_AXES = (
    Axis("activation", "categorical", ("relu", "leakyrelu", "selu")),
    Axis("neurons", "numeric", (4, 8, 16)),
    Axis("layers", "numeric", (1, 3, 5)),
    Axis("layout", "categorical", ("square", "grow", "shrink", "diamond")),
    Axis("optimizer", "categorical", ("adam", "sgd", "rmsprop")),
    Axis("dropout", "numeric", (0.0, 0.2, 0.5)),
    Axis("batch_norm", "numeric", (False, True)),
)


def _is_redundant(config: dict) -> bool:
    # with one hidden layer every layout is the plain square layout
    return config.get("layers") == 1 and config.get("layout", "square") != "square"


@dataclass
class ConfigGrid:
    axes: tuple = DEFAULT_AXES
    configs: list = field(init=False)
    encoded: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        names = [a.name for a in self.axes]
        self.configs = []
        for values in itertools.product(*(a.levels for a in self.axes)):
            cfg = dict(zip(names, values))
            if not _is_redundant(cfg):
                self.configs.append(cfg)
        self.encoded = np.array([self.encode(c) for c in self.configs])

    def __len__(self) -> int:
        return len(self.configs)

    def encode(self, config: dict) -> list[float]:
        out = []
        for a in self.axes:
            out += a.encode(config[a.name])
        return out

    def to_manifest(self) -> dict:
        return {
            "axes": [{"name": a.name, "kind": a.kind, "levels": list(a.levels)} for a in self.axes],
            "redundancy": "layers == 1 keeps only the square layout",
            "size": len(self),
        }

    @classmethod
    def from_manifest(cls, doc: dict) -> "ConfigGrid":
        axes = tuple(Axis(a["name"], a["kind"], tuple(a["levels"])) for a in doc["axes"])
        grid = cls(axes)
        if "size" in doc and doc["size"] != len(grid):
            raise ValueError(f"manifest lists {doc['size']} configurations, grid has {len(grid)}")
        return grid

    def write_manifest(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_manifest(), fh, indent=2, sort_keys=True)

    @classmethod
    def read_manifest(cls, path) -> "ConfigGrid":
        with open(path) as fh:
            return cls.from_manifest(json.load(fh))


@dataclass
class SurrogateTable:
    """Validation error of every grid configuration on one dataset."""

    name: str
    errors: np.ndarray

    def __post_init__(self):
        self.errors = np.asarray(self.errors, dtype=np.float64)
        if not np.all(np.isfinite(self.errors)):
            raise ValueError(f"{self.name}: non-finite validation errors")

    @property
    def y_min(self) -> float:
        return float(self.errors.min())

    @property
    def y_max(self) -> float:
        return float(self.errors.max())

    @property
    def constant(self) -> bool:
        return not self.y_max > self.y_min

    def ranking(self) -> np.ndarray:
        """Configuration indices from best (lowest error) to worst; stable."""
        return np.argsort(self.errors, kind="stable")

    def write_csv(self, grid: ConfigGrid, path) -> None:
        names = [a.name for a in grid.axes]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["config_index"] + names + ["val_error"])
            for i, (cfg, y) in enumerate(zip(grid.configs, self.errors)):
                w.writerow([i] + [cfg[n] for n in names] + [repr(float(y))])

    @classmethod
    def read_csv(cls, path, grid: ConfigGrid | None = None, name: str | None = None
                 ) -> "SurrogateTable":
        path = Path(path)
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        idx = np.array([int(r["config_index"]) for r in rows])
        errors = np.full(len(rows) if grid is None else len(grid), np.nan)
        if grid is not None and (idx.min() < 0 or idx.max() >= len(grid)):
            raise ValueError(f"{path}: config_index outside the grid")
        errors[idx] = [float(r["val_error"]) for r in rows]
        if np.isnan(errors).any():
            raise ValueError(f"{path}: table does not cover every configuration")
        return cls(name or path.stem, errors)
