"""Synthetic surrogate corpus: toy datasets with a quadratic error landscape.

Each dataset's optimum sits at a point of the encoded configuration space
fixed by its generator kind (and, for blobs, interpolated along the class
count), so datasets that look alike also share good configurations.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..data import (TabularDataset, generate_toy, load_manifest_datasets, read_manifest,
                    sample_toy_spec, subsample_fixed, write_csv, write_manifest)
from .grid import ConfigGrid, SurrogateTable

ERROR_FLOOR = 0.05
ERROR_SPAN = 0.6
ERROR_NOISE = 0.01


def latent_optima(grid: ConfigGrid, seed: int) -> dict:
    """Prototype optima: one per circles/moons, two blob endpoints (T=2, T=8)."""
    rng = np.random.default_rng([seed, 7])
    picks = rng.choice(len(grid), size=4, replace=False)
    keys = ("circles", "moons", "blobs_lo", "blobs_hi")
    return {k: grid.encoded[i].copy() for k, i in zip(keys, picks)}


def optimum_for(kind: str, n_classes: int, optima: dict) -> np.ndarray:
    if kind == "blobs":
        a = (n_classes - 2) / 6.0
        return (1.0 - a) * optima["blobs_lo"] + a * optima["blobs_hi"]
    return optima[kind]


def surrogate_errors(grid: ConfigGrid, optimum: np.ndarray, rng: np.random.Generator,
                     noise: float = ERROR_NOISE) -> np.ndarray:
    d2 = ((grid.encoded - optimum) ** 2).sum(axis=1)
    y = ERROR_FLOOR + ERROR_SPAN * d2 / d2.max()
    if noise > 0:
        y = y + rng.normal(0.0, noise, size=len(y))
    return np.clip(y, 0.0, 1.0)


def synth_surrogate(n_datasets: int, grid: ConfigGrid, seed: int, subsample: int = 200,
                    noise: float = ERROR_NOISE) -> dict:
    """name -> (dataset, surrogate table) for ``n_datasets`` toy datasets."""
    if n_datasets < 2:
        raise ValueError("need at least two datasets")
    rng = np.random.default_rng(seed)
    optima = latent_optima(grid, seed)
    out = {}
    for i in range(n_datasets):
        spec = sample_toy_spec(rng)
        name = f"surr{i:04d}_{spec.kind}"
        ds = generate_toy(spec, name=name)
        if subsample:
            ds = subsample_fixed(ds, min(subsample, ds.n_instances), [seed, i])
        errors = surrogate_errors(grid, optimum_for(spec.kind, spec.n_classes, optima),
                                  np.random.default_rng([seed, i, 3]), noise)
        out[name] = (ds, SurrogateTable(name, errors))
    return out


def write_corpus(corpus: dict, grid: ConfigGrid, out_dir) -> None:
    out = Path(out_dir)
    (out / "datasets").mkdir(parents=True, exist_ok=True)
    (out / "tables").mkdir(parents=True, exist_ok=True)
    grid.write_manifest(out / "grid.json")
    records = []
    for name, (ds, table) in corpus.items():
        write_csv(ds, out / "datasets" / f"{name}.csv")
        table.write_csv(grid, out / "tables" / f"{name}.csv")
        records.append({"name": name, "kind": ds.kind, "N": ds.n_instances,
                        "T": ds.n_targets, "path": f"datasets/{name}.csv",
                        "table": f"tables/{name}.csv"})
    write_manifest(records, out / "manifest.jsonl")


def read_corpus(corpus_dir) -> tuple[ConfigGrid, dict[str, TabularDataset],
                                     dict[str, SurrogateTable]]:
    """Load a corpus directory: grid.json, manifest.jsonl, datasets/ and tables/.

    Tables from any source may be dropped in as long as they follow the
    ``config_index,<axes>,val_error`` layout over the manifest's grid.
    """
    root = Path(corpus_dir)
    grid = ConfigGrid.read_manifest(root / "grid.json")
    datasets = {d.name: d for d in load_manifest_datasets(root / "manifest.jsonl")}
    tables = {}
    for rec in read_manifest(root / "manifest.jsonl"):
        tables[rec["name"]] = SurrogateTable.read_csv(root / rec["table"], grid, rec["name"])
    return grid, datasets, tables
