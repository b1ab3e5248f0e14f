"""Same-dataset probability of two batches, its contrastive loss and training."""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from . import ndnet
from .data import TabularDataset
from .encoder import SetEncoder
from .engineered import engineered_mf
from .sampling import Batch, LabeledPair, PairStream, sample_batch, train_valid_split

log = logging.getLogger(__name__)

PROB_EPS = 1e-7


def similarity_from_distance(distance, gamma: float):
    return np.exp(-gamma * np.asarray(distance, dtype=np.float64))


class SimilarityModel:
    """exp(-gamma * ||phi(x) - phi(x')||) on top of a set encoder."""

    def __init__(self, encoder: SetEncoder, gamma: float = 1.0):
        if not gamma > 0:
            raise ValueError("gamma must be positive")
        self.encoder = encoder
        self.gamma = float(gamma)
        self.history: list[tuple[int, float, float]] = []

    def embed(self, batches: Sequence[Batch]) -> np.ndarray:
        with ndnet.no_grad():
            return self.encoder.forward(batches).data

    def similarities(self, pairs: Sequence[LabeledPair], chunk: int = 256) -> np.ndarray:
        out = []
        for s in range(0, len(pairs), chunk):
            part = pairs[s:s + chunk]
            E = self.embed([p.left for p in part] + [p.right for p in part])
            d = np.linalg.norm(E[:len(part)] - E[len(part):], axis=1)
            out.append(similarity_from_distance(d, self.gamma))
        return np.concatenate(out) if out else np.zeros(0)


def similarity(model: SimilarityModel, left: Batch, right: Batch) -> float:
    E = model.embed([left, right])
    return float(similarity_from_distance(np.linalg.norm(E[0] - E[1]), model.gamma))


def pair_loss(model: SimilarityModel, pairs: Sequence[LabeledPair]) -> ndnet.Value:
    """Mean -log(p) over similar pairs plus mean -log(1 - p) over dissimilar ones."""
    labels = np.array([p.same for p in pairs])
    pos = np.flatnonzero(labels == 1)
    neg = np.flatnonzero(labels == 0)
    if len(pos) == 0 or len(neg) == 0:
        raise ValueError("pair loss needs at least one similar and one dissimilar pair")
    n = len(pairs)
    E = model.encoder.forward([p.left for p in pairs] + [p.right for p in pairs])
    diff = ndnet.take_rows(E, np.arange(n)) - ndnet.take_rows(E, np.arange(n, 2 * n))
    prob = ndnet.exp(ndnet.scale(ndnet.row_norm(diff), -model.gamma))
    prob = ndnet.clip(prob, PROB_EPS, 1.0 - PROB_EPS)
    loss_pos = ndnet.mean(ndnet.log(ndnet.take_rows(prob, pos)))
    loss_neg = ndnet.mean(ndnet.log(1.0 - ndnet.take_rows(prob, neg)))
    return -(loss_pos + loss_neg)


# ---------------------------------------------------------------- training


@dataclass
class TrainConfig:
    steps: int = 10_000
    pairs_per_step: int = 16
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    fold: int = 0
    gamma: float = 1.0
    architecture: str = "toy"
    output_activation: str = "relu"
    eval_every: int = 500
    n_val_pairs: int = 400
    valid_fraction: float = 0.1

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps must be at least 1")
        if self.pairs_per_step < 2:
            raise ValueError("pairs_per_step must be at least 2")


class TrainingDiverged(RuntimeError):
    def __init__(self, message: str, model: SimilarityModel):
        super().__init__(message)
        self.model = model


@dataclass
class EvalReport:
    accuracy: float
    n_pairs: int
    threshold: float
    gamma: float
    fold: int | None = None
    per_fold: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2)


def _accuracy(model, pairs: Sequence[LabeledPair], threshold: float) -> float:
    p = model.similarities(pairs)
    labels = np.array([q.same for q in pairs])
    return float(np.mean((p >= threshold).astype(int) == labels))


def train(meta: Sequence[TabularDataset], cfg: TrainConfig,
          valid: Sequence[TabularDataset] | None = None) -> SimilarityModel:
    """Adam on stratified pair batches; keeps the parameters with the best
    validation pair accuracy.

    Without an explicit ``valid`` list, ``cfg.valid_fraction`` of ``meta`` is
    held out (or, if that is zero, ``meta`` itself is used for validation).
    """
    meta = list(meta)
    if valid is None:
        if cfg.valid_fraction > 0:
            names = [d.name for d in meta]
            tr, va = train_valid_split(names, cfg.valid_fraction, cfg.seed)
            by_name = {d.name: d for d in meta}
            meta, valid = [by_name[n] for n in tr], [by_name[n] for n in va]
        else:
            valid = meta
    if len(meta) < 2:
        raise ValueError("training needs at least two datasets")

    enc = SetEncoder(cfg.architecture, seed=cfg.seed, output_activation=cfg.output_activation)
    model = SimilarityModel(enc, cfg.gamma)
    opt = ndnet.Adam(enc.parameters(), cfg.lr, cfg.beta1, cfg.beta2, cfg.eps)
    stream = PairStream(meta, np.random.default_rng([cfg.seed, 1]))
    val_pairs = PairStream(valid, np.random.default_rng([cfg.seed, 2])).take(cfg.n_val_pairs)

    best_acc, best_state = -1.0, enc.get_state()
    running = []
    for step in range(1, cfg.steps + 1):
        loss = pair_loss(model, stream.take(cfg.pairs_per_step))
        value = loss.item()
        if not math.isfinite(value):
            enc.set_state(best_state)
            raise TrainingDiverged(f"loss became {value} at step {step}", model)
        opt.zero_grad()
        ndnet.backward(loss)
        try:
            opt.step()
        except FloatingPointError as err:
            enc.set_state(best_state)
            raise TrainingDiverged(f"step {step}: {err}", model) from err
        running.append(value)
        if step % cfg.eval_every == 0 or step == cfg.steps:
            acc = _accuracy(model, val_pairs, 0.5)
            mean_loss = float(np.mean(running))
            running = []
            model.history.append((step, mean_loss, acc))
            log.info("step %d loss %.4f val_acc %.4f", step, mean_loss, acc)
            if acc > best_acc:
                best_acc, best_state = acc, enc.get_state()
    enc.set_state(best_state)
    return model


def write_train_log(history, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step", "loss", "val_accuracy"])
        for step, loss, acc in history:
            w.writerow([step, repr(loss), repr(acc)])


# -------------------------------------------------------------- evaluation


def balanced_pairs(meta: Sequence[TabularDataset], n_pairs: int,
                   rng: np.random.Generator) -> list[LabeledPair]:
    return PairStream(meta, rng).take(n_pairs)


def evaluate_pairs(model, meta: Sequence[TabularDataset], n_pairs: int,
                   threshold: float = 0.5, rng: np.random.Generator | None = None,
                   fold: int | None = None) -> EvalReport:
    """Accuracy of ``similarity >= threshold`` as a same-dataset classifier
    on a label-balanced pair sample from ``meta``."""
    if len(meta) < 2:
        raise ValueError("evaluation needs at least two datasets to form dissimilar pairs")
    rng = rng if rng is not None else np.random.default_rng(0)
    pairs = balanced_pairs(meta, n_pairs, rng)
    return EvalReport(accuracy=_accuracy(model, pairs, threshold), n_pairs=n_pairs,
                      threshold=threshold, gamma=float(getattr(model, "gamma", float("nan"))),
                      fold=fold)


class EngineeredSimilarity:
    """The same probability model over z-scored engineered meta-features."""

    def __init__(self, mean: np.ndarray, std: np.ndarray, gamma: float = 1.0):
        self.mean = mean
        self.std = np.where(std > 0, std, 1.0)
        self.gamma = float(gamma)

    @classmethod
    def fit(cls, meta: Sequence[TabularDataset], rng: np.random.Generator,
            gamma: float = 1.0, n_batches: int = 1000) -> "EngineeredSimilarity":
        """z-score statistics from batches sampled across ``meta``."""
        feats = np.array([engineered_mf(sample_batch(meta[int(rng.integers(len(meta)))], rng))
                          for _ in range(n_batches)])
        return cls(feats.mean(axis=0), feats.std(axis=0), gamma)

    def embed(self, batches: Sequence[Batch]) -> np.ndarray:
        return (np.array([engineered_mf(b) for b in batches]) - self.mean) / self.std

    def similarities(self, pairs: Sequence[LabeledPair]) -> np.ndarray:
        left = self.embed([p.left for p in pairs])
        right = self.embed([p.right for p in pairs])
        return similarity_from_distance(np.linalg.norm(left - right, axis=1), self.gamma)
