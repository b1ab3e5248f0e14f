"""Multi-fidelity batches, labeled batch pairs and dataset-level folds."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .data import TabularDataset

BATCH_SIZES = (16, 32, 64, 128, 256)


@dataclass(frozen=True, eq=False)
class Batch:
    X: np.ndarray
    Y: np.ndarray
    source: str
    rows: np.ndarray
    predictors: np.ndarray
    targets: np.ndarray

    @property
    def shape(self) -> tuple[int, int, int]:
        return len(self.rows), len(self.predictors), len(self.targets)


@dataclass(frozen=True)
class LabeledPair:
    left: Batch
    right: Batch
    same: int


def make_batch(ds: TabularDataset, rows, predictors, targets) -> Batch:
    rows = np.sort(np.asarray(rows, dtype=np.int64))
    predictors = np.sort(np.asarray(predictors, dtype=np.int64))
    targets = np.sort(np.asarray(targets, dtype=np.int64))
    return Batch(X=ds.X[np.ix_(rows, predictors)], Y=ds.Y[np.ix_(rows, targets)],
                 source=ds.name, rows=rows, predictors=predictors, targets=targets)


def full_batch(ds: TabularDataset) -> Batch:
    return make_batch(ds, np.arange(ds.n_instances), np.arange(ds.n_predictors),
                      np.arange(ds.n_targets))


def sample_batch(ds: TabularDataset, rng: np.random.Generator) -> Batch:
    """Random instance/predictor/target subsets of ``ds``.

    The instance count is drawn from 16..256 (powers of two) and clamped to N.
    """
    n_req = BATCH_SIZES[int(rng.integers(len(BATCH_SIZES)))]
    N, M, T = ds.n_instances, ds.n_predictors, ds.n_targets
    if N < BATCH_SIZES[0]:
        warnings.warn(f"{ds.name}: only {N} instances; using all of them", stacklevel=2)
    n = min(n_req, N)
    m = int(rng.integers(1, M + 1))
    t = int(rng.integers(1, T + 1))
    rows = rng.choice(N, size=n, replace=False)
    preds = rng.choice(M, size=m, replace=False)
    targs = rng.choice(T, size=t, replace=False)
    return make_batch(ds, rows, preds, targs)


def _check_meta(meta: Sequence[TabularDataset]) -> None:
    if len(meta) < 2:
        raise ValueError("need at least two datasets to form dissimilar pairs")


def pair_with_label(meta: Sequence[TabularDataset], same: int,
                    rng: np.random.Generator) -> LabeledPair:
    _check_meta(meta)
    i = int(rng.integers(len(meta)))
    if same:
        j = i
    else:
        j = int(rng.integers(len(meta) - 1))
        j += j >= i
    left = sample_batch(meta[i], rng)
    right = sample_batch(meta[j], rng)
    return LabeledPair(left, right, int(same))


def sample_pair(meta: Sequence[TabularDataset], rng: np.random.Generator) -> LabeledPair:
    """One pair; same-dataset with probability 1/2."""
    _check_meta(meta)
    i = int(rng.integers(len(meta)))
    if rng.uniform() < 0.5:
        j = int(rng.integers(len(meta) - 1))
        j += j >= i
        same = 0
    else:
        j, same = i, 1
    left = sample_batch(meta[i], rng)
    right = sample_batch(meta[j], rng)
    return LabeledPair(left, right, same)


class PairStream:
    """Stratified pair stream: labels alternate 1, 0, 1, 0, ..."""

    def __init__(self, meta: Sequence[TabularDataset], rng: np.random.Generator):
        _check_meta(meta)
        self.meta = list(meta)
        self.rng = rng
        self._next_label = 1

    def next(self) -> LabeledPair:
        pair = pair_with_label(self.meta, self._next_label, self.rng)
        self._next_label ^= 1
        return pair

    def take(self, n: int) -> list[LabeledPair]:
        return [self.next() for _ in range(n)]


def dump_pairs(pairs: Sequence[LabeledPair], path, seed: int) -> None:
    with open(path, "w") as fh:
        for p in pairs:
            rec = {"left_source": p.left.source, "right_source": p.right.source, "i": p.same,
                   "left_shape": list(p.left.shape), "right_shape": list(p.right.shape),
                   "seed": seed}
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def kfold_split(names: Sequence[str], k: int = 5, seed: int = 0
                ) -> list[tuple[list[str], list[str]]]:
    """Shuffle dataset names and cut them into k disjoint test folds."""
    names = list(names)
    if k < 2 or k > len(names):
        raise ValueError(f"cannot split {len(names)} datasets into {k} folds")
    order = np.random.default_rng(seed).permutation(len(names))
    folds = np.array_split(order, k)
    out = []
    for f in folds:
        test = set(f.tolist())
        out.append(([names[i] for i in order if i not in test],
                    [names[i] for i in sorted(test)]))
    return out


def train_valid_split(names: Sequence[str], valid_fraction: float, seed: int
                      ) -> tuple[list[str], list[str]]:
    names = list(names)
    n_valid = max(2, int(round(valid_fraction * len(names)))) if valid_fraction > 0 else 0
    if n_valid and len(names) - n_valid < 2:
        raise ValueError("too few datasets to hold out a validation split")
    order = np.random.default_rng(seed).permutation(len(names))
    valid = sorted(order[:n_valid].tolist())
    train = sorted(order[n_valid:].tolist())
    return [names[i] for i in train], [names[i] for i in valid]
