"""Leave-one-dataset-out comparison of initialization strategies."""

from __future__ import annotations

import csv
from typing import Callable, Mapping, Sequence

import numpy as np

from ..data import TabularDataset
from ..encoder import SetEncoder, extract
from ..engineered import engineered_mf
from .grid import ConfigGrid, SurrogateTable
from .search import HpoRun, adtm_curve, gp_smbo, random_search, warm_start

METHODS = ("random", "gp", "warmstart-d2v", "warmstart-mf1")


def encoder_features(enc: SetEncoder, datasets: Mapping[str, TabularDataset],
                     n_batches: int, seed: int) -> dict[str, np.ndarray]:
    return {name: extract(enc, ds, n_batches, np.random.default_rng([seed, i])).vector
            for i, (name, ds) in enumerate(sorted(datasets.items()))}


def engineered_features(datasets: Mapping[str, TabularDataset]) -> dict[str, np.ndarray]:
    return {name: engineered_mf(ds) for name, ds in datasets.items()}


def _zscored_library(features: Mapping[str, np.ndarray], target: str):
    others = [k for k in sorted(features) if k != target]
    F = np.array([features[k] for k in others])
    mu, sd = F.mean(axis=0), F.std(axis=0)
    sd = np.where(sd > 0, sd, 1.0)
    return {k: (features[k] - mu) / sd for k in others}, (features[target] - mu) / sd


def run_method(method: str, target: str, grid: ConfigGrid,
               tables: Mapping[str, SurrogateTable], budget: int, seed: int,
               n_init: int = 5, n_neighbors: int = 3,
               features: Mapping[str, np.ndarray] | None = None,
               standardize: bool = False) -> HpoRun:
    table = tables[target]
    if method == "random":
        run = random_search(table, budget, [seed, 11])
    elif method == "gp":
        init = np.random.default_rng([seed, 12]).choice(len(grid), n_init, replace=False)
        run = gp_smbo(table, grid.encoded, init.tolist(), budget, [seed, 13], method)
    else:
        if features is None:
            raise ValueError(f"{method} needs meta-features")
        if standardize:
            lib, tvec = _zscored_library(features, target)
        else:
            lib = {k: features[k] for k in features if k != target}
            tvec = features[target]
        library = {k: (v, tables[k]) for k, v in lib.items()}
        init = warm_start(tvec, library, n_init, n_neighbors)
        run = gp_smbo(table, grid.encoded, init, budget, [seed, 13], method)
    run.method, run.seed, run.dataset = method, seed, target
    return run


def run_experiment(grid: ConfigGrid, tables: Mapping[str, SurrogateTable],
                   methods: Sequence[str], seeds: Sequence[int], budget: int,
                   n_init: int = 5, n_neighbors: int = 3,
                   feature_fn: Mapping[str, Callable[[int], Mapping[str, np.ndarray]]] | None = None,
                   ) -> list[HpoRun]:
    """All (seed, method, dataset) runs.  ``feature_fn[method](seed)`` gives
    the meta-features a warm-start method uses under that seed."""
    feature_fn = feature_fn or {}
    runs = []
    for seed in seeds:
        for method in methods:
            feats = feature_fn[method](seed) if method in feature_fn else None
            for target in sorted(tables):
                runs.append(run_method(method, target, grid, tables, budget, seed, n_init,
                                       n_neighbors, feats, standardize=method.endswith("mf1")))
    return runs


def mean_curves(runs: Sequence[HpoRun], tables: Mapping[str, SurrogateTable],
                budget: int) -> dict[str, np.ndarray]:
    """ADTM curve per method, averaged over seeds."""
    by_key: dict[tuple, dict] = {}
    for r in runs:
        by_key.setdefault((r.method, r.seed), {})[r.dataset] = r
    curves: dict[str, list] = {}
    for (method, _), group in sorted(by_key.items()):
        curves.setdefault(method, []).append(adtm_curve(group, tables, budget))
    return {m: np.mean(c, axis=0) for m, c in curves.items()}


def write_results(runs: Sequence[HpoRun], tables: Mapping[str, SurrogateTable], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["dataset", "method", "seed", "trial", "incumbent_error", "adtm_numerator"])
        for r in runs:
            y_min = tables[r.dataset].y_min
            for t, inc in enumerate(r.incumbent(), start=1):
                w.writerow([r.dataset, r.method, r.seed, t, repr(float(inc)),
                            repr(float(inc - y_min))])


def write_curves(curves: Mapping[str, np.ndarray], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "trial", "adtm"])
        for method, curve in curves.items():
            for t, v in enumerate(curve, start=1):
                w.writerow([method, t, repr(float(v))])
