"""Tabular datasets: CSV ingestion, normalization and the 2-D toy generator."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from sklearn.datasets import make_blobs, make_circles, make_moons

TOY_KINDS = ("circles", "moons", "blobs")
TOY_SIZES = (2048, 4096, 8192, 16384)
TOY_NOISE_SIGMA = 0.1
CIRCLE_FACTOR = 0.5
BLOB_CENTER_BOX = (-10.0, 10.0)
BLOB_CLASSES = (2, 8)
TOY_SEED_RANGE = (0, 100)


class IngestionError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class TabularDataset:
    """Normalized predictors ``X`` (N x M) and one-hot targets ``Y`` (N x T)."""

    X: np.ndarray
    Y: np.ndarray
    name: str
    kind: str | None = None
    columns: tuple[str, ...] = field(default=())
    classes: tuple[str, ...] = field(default=())

    def __post_init__(self):
        if self.X.ndim != 2 or self.Y.ndim != 2:
            raise ValueError("X and Y must be 2-D")
        if self.X.shape[0] != self.Y.shape[0]:
            raise ValueError(f"X has {self.X.shape[0]} rows but Y has {self.Y.shape[0]}")
        if min(self.X.shape) < 1 or self.Y.shape[1] < 1:
            raise ValueError(f"degenerate dataset shape X={self.X.shape} Y={self.Y.shape}")

    @property
    def n_instances(self) -> int:
        return self.X.shape[0]

    @property
    def n_predictors(self) -> int:
        return self.X.shape[1]

    @property
    def n_targets(self) -> int:
        return self.Y.shape[1]

    def labels(self) -> np.ndarray:
        return np.argmax(self.Y, axis=1)


def minmax_normalize(X: np.ndarray) -> np.ndarray:
    """Column-wise min-max scaling to [0, 1]; constant columns become 0."""
    X = np.asarray(X, dtype=np.float64)
    lo = X.min(axis=0)
    span = X.max(axis=0) - lo
    out = np.zeros_like(X)
    ok = span > 0
    out[:, ok] = (X[:, ok] - lo[ok]) / span[ok]
    # guard against rounding just past the unit interval
    return np.clip(out, 0.0, 1.0)


def one_hot(labels, classes=None) -> tuple[np.ndarray, tuple]:
    labels = list(labels)
    if classes is None:
        classes = sorted(set(labels), key=_class_sort_key)
    index = {c: i for i, c in enumerate(classes)}
    Y = np.zeros((len(labels), len(classes)))
    Y[np.arange(len(labels)), [index[c] for c in labels]] = 1.0
    return Y, tuple(classes)


def _class_sort_key(c):
    try:
        return (0, float(c), str(c))
    except (TypeError, ValueError):
        return (1, 0.0, str(c))


def ingest_csv(path, target: str | int = -1, name: str | None = None,
               kind: str | None = None) -> TabularDataset:
    """Read a header-row CSV with numeric predictors and one class column.

    ``target`` is a column name or a (possibly negative) column position.
    """
    path = Path(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise IngestionError(f"{path}: empty file")
    header, body = rows[0], [r for r in rows[1:] if r]
    width = len(header)
    if not body:
        raise IngestionError(f"{path}: no data rows")
    for lineno, r in enumerate(body, start=2):
        if len(r) != width:
            raise IngestionError(
                f"{path}: line {lineno} has {len(r)} fields, header has {width}")
    if isinstance(target, str) and not target.lstrip("-").isdigit():
        if target not in header:
            raise IngestionError(f"{path}: no target column {target!r}")
        t_idx = header.index(target)
    else:
        t_idx = int(target) % width
    if width < 2:
        raise IngestionError(f"{path}: need at least one predictor and a target column")
    p_idx = [j for j in range(width) if j != t_idx]
    X = np.empty((len(body), len(p_idx)))
    for i, r in enumerate(body):
        for k, j in enumerate(p_idx):
            try:
                X[i, k] = float(r[j])
            except ValueError:
                raise IngestionError(
                    f"{path}: non-numeric predictor {header[j]!r} at line {i + 2}: {r[j]!r}"
                ) from None
    if not np.all(np.isfinite(X)):
        raise IngestionError(f"{path}: NaN or infinite predictor values")
    labels = [r[t_idx].strip() for r in body]
    if len(set(labels)) < 2:
        raise IngestionError(f"{path}: target column {header[t_idx]!r} has a single class")
    Y, classes = one_hot(labels)
    return TabularDataset(
        X=minmax_normalize(X), Y=Y, name=name or path.stem, kind=kind or "ingested",
        columns=tuple(header[j] for j in p_idx), classes=classes)


def write_csv(ds: TabularDataset, path) -> None:
    """Write predictors plus a ``target`` class-index column (exact float repr)."""
    cols = list(ds.columns) or [f"x{j}" for j in range(ds.n_predictors)]
    labels = ds.labels()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols + ["target"])
        for row, lab in zip(ds.X, labels):
            w.writerow([repr(float(v)) for v in row] + [int(lab)])


# ------------------------------------------------------------------- toy


@dataclass(frozen=True)
class ToyGenSpec:
    kind: str
    n_instances: int
    n_classes: int
    seed: int
    noise: bool

    def __post_init__(self):
        if self.kind not in TOY_KINDS:
            raise ValueError(f"unknown toy kind {self.kind!r}")
        if self.n_instances not in TOY_SIZES:
            raise ValueError(f"instance count must be one of {TOY_SIZES}")
        if self.kind == "blobs":
            if not BLOB_CLASSES[0] <= self.n_classes <= BLOB_CLASSES[1]:
                raise ValueError(f"blob class count must lie in {BLOB_CLASSES}")
        elif self.n_classes != 2:
            raise ValueError(f"{self.kind} datasets have exactly 2 classes")
        if not TOY_SEED_RANGE[0] <= self.seed <= TOY_SEED_RANGE[1]:
            raise ValueError(f"seed must lie in {TOY_SEED_RANGE}")


def sample_toy_spec(rng: np.random.Generator) -> ToyGenSpec:
    """Draw the generator settings of one toy dataset."""
    seed = int(rng.integers(TOY_SEED_RANGE[0], TOY_SEED_RANGE[1] + 1))
    n = int(2 ** rng.integers(11, 15))
    kind = TOY_KINDS[int(rng.integers(len(TOY_KINDS)))]
    classes = int(rng.integers(BLOB_CLASSES[0], BLOB_CLASSES[1] + 1)) if kind == "blobs" else 2
    noise = bool(rng.uniform() < 0.5)
    return ToyGenSpec(kind, n, classes, seed, noise)


def toy_name(spec: ToyGenSpec, index: int) -> str:
    return f"toy{index:05d}_{spec.kind}"


def raw_toy(spec: ToyGenSpec, noise_sigma: float = TOY_NOISE_SIGMA) -> tuple[np.ndarray, np.ndarray]:
    """Un-normalized points and integer labels for ``spec``."""
    n, s = spec.n_instances, spec.seed
    if spec.kind == "circles":
        X, y = make_circles(n_samples=n, factor=CIRCLE_FACTOR, random_state=s)
    elif spec.kind == "moons":
        X, y = make_moons(n_samples=n, random_state=s)
    else:
        X, y = make_blobs(n_samples=n, centers=spec.n_classes, center_box=BLOB_CENTER_BOX,
                          random_state=s)
        y = _ensure_all_classes(y, spec.n_classes)
    if spec.noise and noise_sigma > 0:
        jitter = np.random.default_rng([s, n, spec.n_classes, 1]).normal(0.0, noise_sigma, X.shape)
        X = X + jitter
    return X.astype(np.float64), y.astype(np.int64)


def _ensure_all_classes(y: np.ndarray, k: int) -> np.ndarray:
    # make_blobs splits n evenly across centers, so this only triggers for tiny n
    missing = sorted(set(range(k)) - set(y.tolist()))
    y = y.copy()
    for i, c in enumerate(missing):
        y[i] = c
    return y


def generate_toy(spec: ToyGenSpec, name: str | None = None,
                 noise_sigma: float = TOY_NOISE_SIGMA) -> TabularDataset:
    X, y = raw_toy(spec, noise_sigma)
    Y, _ = one_hot(y.tolist(), classes=list(range(spec.n_classes)))
    return TabularDataset(X=minmax_normalize(X), Y=Y, name=name or f"{spec.kind}_{spec.seed}",
                          kind=spec.kind, columns=("x0", "x1"),
                          classes=tuple(str(c) for c in range(spec.n_classes)))


def subsample_fixed(ds: TabularDataset, n: int, seed) -> TabularDataset:
    """``n`` rows drawn without replacement; values are not re-normalized."""
    if n > ds.n_instances:
        raise IndexError(f"cannot draw {n} rows from a dataset with {ds.n_instances}")
    if n < 1:
        raise IndexError("subsample size must be positive")
    idx = np.random.default_rng(seed).permutation(ds.n_instances)[:n]
    return TabularDataset(X=ds.X[idx], Y=ds.Y[idx], name=ds.name, kind=ds.kind,
                          columns=ds.columns, classes=ds.classes)


def generate_toy_collection(count: int, seed: int, subsample: int | None = None
                            ) -> list[tuple[ToyGenSpec, TabularDataset]]:
    rng = np.random.default_rng(seed)
    out = []
    for i in range(count):
        spec = sample_toy_spec(rng)
        ds = generate_toy(spec, name=toy_name(spec, i))
        if subsample is not None:
            ds = subsample_fixed(ds, min(subsample, ds.n_instances), [seed, i])
        out.append((spec, ds))
    return out


# -------------------------------------------------------------- manifests


def manifest_record(spec: ToyGenSpec, ds: TabularDataset, path: str | None = None) -> dict:
    rec = {"name": ds.name, "kind": spec.kind, "N": ds.n_instances, "T": spec.n_classes,
           "seed": spec.seed, "noise": spec.noise}
    if path is not None:
        rec["path"] = path
    return rec


def write_manifest(records, path) -> None:
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def read_manifest(path) -> list[dict]:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


def load_manifest_datasets(path) -> list[TabularDataset]:
    """Ingest every dataset listed (paths relative to the manifest)."""
    path = Path(path)
    out = []
    for rec in read_manifest(path):
        p = path.parent / rec["path"]
        ds = ingest_csv(p, target="target", name=rec["name"], kind=rec.get("kind"))
        # toy class columns keep the generator's class count even when a
        # class went missing after subsampling
        t = rec.get("T")
        if t is not None and ds.n_targets != t and all(c.isdigit() for c in ds.classes):
            Y, classes = one_hot([int(ds.classes[j]) for j in ds.labels()],
                                 classes=list(range(t)))
            ds = TabularDataset(X=ds.X, Y=Y, name=ds.name, kind=ds.kind, columns=ds.columns,
                                classes=tuple(str(c) for c in classes))
        out.append(ds)
    return out


def is_finite_dataset(ds: TabularDataset) -> bool:
    return bool(np.all(np.isfinite(ds.X)) and np.all(np.isfinite(ds.Y)))

