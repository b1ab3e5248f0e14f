"""Optimizers over a surrogate table, warm-start initialization and ADTM."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .gp import expected_improvement, fit_gp
from .grid import SurrogateTable


@dataclass
class HpoRun:
    method: str
    trials: list = field(default_factory=list)
    errors: list = field(default_factory=list)
    seed: int = 0
    dataset: str = ""

    def incumbent(self) -> np.ndarray:
        return np.minimum.accumulate(np.asarray(self.errors, dtype=np.float64))

    def add(self, index: int, error: float) -> None:
        if index in self.trials:
            raise ValueError(f"configuration {index} evaluated twice")
        self.trials.append(int(index))
        self.errors.append(float(error))


def random_search(table: SurrogateTable, budget: int, seed) -> HpoRun:
    n = len(table.errors)
    if budget > n:
        raise ValueError(f"budget {budget} exceeds grid size {n}")
    run = HpoRun("random", seed=seed if isinstance(seed, int) else 0, dataset=table.name)
    for i in np.random.default_rng(seed).permutation(n)[:budget]:
        run.add(int(i), table.errors[i])
    return run


def gp_smbo(table: SurrogateTable, encoded: np.ndarray, init: Sequence[int], budget: int,
            seed, method: str = "gp") -> HpoRun:
    """Evaluate ``init``, then pick unobserved points by expected improvement
    under a GP fitted to the standardized observed errors."""
    init = list(dict.fromkeys(int(i) for i in init))
    if budget < len(init):
        raise ValueError(f"budget {budget} is smaller than the {len(init)} initial points")
    n = len(table.errors)
    rng = np.random.default_rng(seed)
    run = HpoRun(method, seed=seed if isinstance(seed, int) else 0, dataset=table.name)
    for i in init:
        run.add(i, table.errors[i])
    observed = np.zeros(n, dtype=bool)
    observed[init] = True
    while len(run.trials) < min(budget, n):
        y = np.asarray(run.errors)
        sd = y.std()
        z = (y - y.mean()) / (sd if sd > 0 else 1.0)
        gp = fit_gp(encoded[run.trials], z)
        cand = np.flatnonzero(~observed)
        mean, var = gp.predict(encoded[cand])
        ei = expected_improvement(mean, var, z.min())
        top = cand[ei >= ei.max()]
        pick = int(top[0]) if len(top) == 1 else int(rng.choice(top))
        run.add(pick, table.errors[pick])
        observed[pick] = True
    return run


def warm_start(target: np.ndarray, library: Mapping[str, tuple[np.ndarray, SurrogateTable]],
               n_init: int = 5, n_neighbors: int = 3) -> list[int]:
    """Best configurations of the datasets nearest to ``target`` in
    meta-feature space, taken round-robin (best of each neighbor, then second
    best, ...) and skipping duplicates."""
    if not library:
        raise ValueError("empty warm-start library")
    grid_size = len(next(iter(library.values()))[1].errors)
    if n_init > grid_size:
        raise ValueError(f"n_init {n_init} exceeds grid size {grid_size}")
    names = sorted(library)
    dist = np.array([np.linalg.norm(np.asarray(library[k][0]) - target) for k in names])
    order = np.argsort(dist, kind="stable")[:max(1, n_neighbors)]
    rankings = [library[names[i]][1].ranking() for i in order]
    picks: list[int] = []
    depth = 0
    while len(picks) < n_init:
        for r in rankings:
            c = int(r[depth])
            if c not in picks:
                picks.append(c)
                if len(picks) == n_init:
                    break
        depth += 1
    return picks


def normalized_regret(run: HpoRun, table: SurrogateTable, t: int) -> float:
    if len(run.errors) < t:
        raise ValueError(f"run on {table.name} has only {len(run.errors)} trials, need {t}")
    best = min(run.errors[:t])
    return (best - table.y_min) / (table.y_max - table.y_min)


def adtm(runs: Mapping[str, HpoRun], tables: Mapping[str, SurrogateTable], t: int) -> float:
    """Average over datasets of the normalized distance of the best of the
    first ``t`` trials to the table minimum."""
    vals = []
    for name, run in runs.items():
        table = tables[name]
        if table.constant:
            warnings.warn(f"{name}: constant validation error, excluded from ADTM", stacklevel=2)
            continue
        vals.append(normalized_regret(run, table, t))
    if not vals:
        raise ValueError("no non-constant dataset to average over")
    return float(np.mean(vals))


def adtm_curve(runs: Mapping[str, HpoRun], tables: Mapping[str, SurrogateTable],
               budget: int) -> np.ndarray:
    return np.array([adtm(runs, tables, t) for t in range(1, budget + 1)])
