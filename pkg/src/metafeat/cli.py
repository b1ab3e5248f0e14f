"""Command-line entry point: ``metafeat <command> [options]``.

Exit status is 0 on success, 2 for configuration errors and 1 otherwise.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .config import ConfigError
from .data import generate_toy_collection, manifest_record, read_manifest, write_csv, \
    write_manifest, load_manifest_datasets
from .encoder import SetEncoder, extract, read_metafeatures_csv, write_metafeatures_csv
from .mds import classical_mds, write_embedding
from .sampling import kfold_split
from .similarity import (EngineeredSimilarity, SimilarityModel, TrainConfig, evaluate_pairs,
                         train, write_train_log)

log = logging.getLogger("metafeat")


def _datasets_by_name(manifest):
    return {d.name: d for d in load_manifest_datasets(manifest)}


def _load_model(checkpoint, architecture: str, seed: int, gamma=None) -> SimilarityModel:
    if checkpoint:
        with open(checkpoint) as fh:
            doc = json.load(fh)
        enc = SetEncoder.from_dict(doc)
        g = gamma if gamma is not None else doc.get("gamma", 1.0)
    else:
        enc = SetEncoder(architecture, seed=seed)
        g = gamma if gamma is not None else 1.0
    return SimilarityModel(enc, g)


def cmd_gen_toy(cfg, out: Path) -> None:
    (out / "datasets").mkdir(parents=True, exist_ok=True)
    records = []
    for spec, ds in generate_toy_collection(cfg.count, cfg.seed, cfg.subsample):
        rel = f"datasets/{ds.name}.csv"
        write_csv(ds, out / rel)
        records.append(manifest_record(spec, ds, rel))
    write_manifest(records, out / "manifest.jsonl")


def cmd_train(cfg, out: Path) -> None:
    meta = _datasets_by_name(cfg.manifest)
    folds = kfold_split(sorted(meta), cfg.folds, cfg.seed)
    if not 0 <= cfg.fold < len(folds):
        raise ConfigError(f"train.fold: must lie in [0, {len(folds) - 1}]")
    train_names, test_names = folds[cfg.fold]
    tc = TrainConfig(steps=cfg.steps, pairs_per_step=cfg.pairs_per_step, lr=cfg.lr,
                     seed=cfg.seed, fold=cfg.fold, gamma=cfg.gamma,
                     architecture=cfg.architecture, output_activation=cfg.output_activation,
                     eval_every=cfg.eval_every, n_val_pairs=cfg.n_val_pairs,
                     valid_fraction=cfg.valid_fraction)
    model = train([meta[n] for n in train_names], tc)
    model.encoder.save(out / "checkpoint.json", {"gamma": model.gamma})
    write_train_log(model.history, out / "train_log.csv")
    with open(out / "split.json", "w") as fh:
        json.dump({"fold": cfg.fold, "folds": cfg.folds, "train": train_names,
                   "test": test_names}, fh, indent=2)


def _split_names(cfg, meta: dict) -> tuple[list[str], list[str], int | None]:
    split = cfg.split
    if split is None and cfg.checkpoint:
        cand = Path(cfg.checkpoint).parent / "split.json"
        split = str(cand) if cand.exists() else None
    if split is not None:
        with open(split) as fh:
            doc = json.load(fh)
        return doc["train"], doc["test"], doc.get("fold")
    if cfg.fold is not None:
        tr, te = kfold_split(sorted(meta), cfg.folds, cfg.seed)[cfg.fold]
        return tr, te, cfg.fold
    return sorted(meta), sorted(meta), None


def cmd_eval_pairs(cfg, out: Path) -> None:
    meta = _datasets_by_name(cfg.manifest)
    train_names, test_names, fold = _split_names(cfg, meta)
    test = [meta[n] for n in test_names]
    if cfg.baseline == "mf1":
        model = EngineeredSimilarity.fit([meta[n] for n in train_names],
                                         np.random.default_rng([cfg.seed, 5]),
                                         gamma=cfg.gamma if cfg.gamma is not None else 1.0)
    elif cfg.baseline == "none":
        model = _load_model(cfg.checkpoint, cfg.architecture, cfg.seed, cfg.gamma)
    else:
        raise ConfigError(f"eval-pairs.baseline: unknown baseline {cfg.baseline!r}")
    report = evaluate_pairs(model, test, cfg.n_pairs, cfg.threshold,
                            np.random.default_rng(cfg.seed), fold=fold)
    (out / "report.json").write_text(report.to_json() + "\n")
    print(f"accuracy {report.accuracy:.4f} on {report.n_pairs} pairs")


def cmd_extract(cfg, out: Path) -> None:
    meta = load_manifest_datasets(cfg.manifest)
    model = _load_model(cfg.checkpoint, cfg.architecture, cfg.seed)
    feats = [extract(model.encoder, ds, cfg.batches, np.random.default_rng(cfg.seed))
             for ds in meta]
    write_metafeatures_csv(feats, out / "metafeatures.csv")


def cmd_embed_mds(cfg, out: Path) -> None:
    names, values = read_metafeatures_csv(cfg.features)
    if len(names) < 3:
        raise ValueError(f"need at least 3 rows of meta-features, got {len(names)}")
    labels = {}
    if cfg.manifest:
        labels = {r["name"]: r.get("kind", "") for r in read_manifest(cfg.manifest)}
    coords = classical_mds(values, 2)
    write_embedding(names, coords, [labels.get(n, "") for n in names], out / "embedding.csv")


def cmd_synth_surrogate(cfg, out: Path) -> None:
    from .hpo import ConfigGrid, synth_surrogate, write_corpus

    grid = ConfigGrid()
    write_corpus(synth_surrogate(cfg.count, grid, cfg.seed, cfg.subsample), grid, out)


def cmd_hpo(cfg, out: Path) -> None:
    from .hpo import read_corpus
    from .hpo.experiment import (METHODS, encoder_features, engineered_features, mean_curves,
                                 run_experiment, write_curves, write_results)

    unknown = [m for m in cfg.methods if m not in METHODS]
    if unknown:
        raise ConfigError(f"hpo.methods: unknown methods {unknown}; choose from {METHODS}")
    grid, datasets, tables = read_corpus(cfg.corpus)
    feature_fn = {}
    if "warmstart-d2v" in cfg.methods:
        if not cfg.checkpoint:
            raise ConfigError("hpo.checkpoint: required for warmstart-d2v")
        enc = _load_model(cfg.checkpoint, "toy", cfg.seed).encoder
        feature_fn["warmstart-d2v"] = lambda s: encoder_features(
            enc, datasets, cfg.batches, cfg.seed + s)
    if "warmstart-mf1" in cfg.methods:
        mf1 = engineered_features(datasets)
        feature_fn["warmstart-mf1"] = lambda s: mf1
    seeds = [cfg.seed + s for s in range(cfg.seeds)]
    runs = run_experiment(grid, tables, cfg.methods, seeds, cfg.budget, cfg.n_init,
                          cfg.n_neighbors, feature_fn)
    write_results(runs, tables, out / "results.csv")
    curves = mean_curves(runs, tables, cfg.budget)
    write_curves(curves, out / "adtm.csv")
    for m, c in curves.items():
        print(f"{m:>16s}  ADTM@10 {c[min(9, len(c) - 1)]:.4f}  ADTM@{len(c)} {c[-1]:.4f}")


COMMANDS = {
    "gen-toy": cmd_gen_toy,
    "train": cmd_train,
    "eval-pairs": cmd_eval_pairs,
    "extract": cmd_extract,
    "embed-mds": cmd_embed_mds,
    "synth-surrogate": cmd_synth_surrogate,
    "hpo": cmd_hpo,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--config", default=None, help="JSON or YAML parameter file")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="metafeat", description=__doc__.splitlines()[0],
                                parents=[common])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("gen-toy", parents=[common], help="generate 2-D toy datasets")
    s.add_argument("--count", type=int)
    s.add_argument("--subsample", type=int)

    s = sub.add_parser("train", parents=[common], help="train the set encoder on one fold")
    s.add_argument("--manifest")
    s.add_argument("--fold", type=int)
    s.add_argument("--folds", type=int)
    s.add_argument("--steps", type=int)
    s.add_argument("--pairs-per-step", dest="pairs_per_step", type=int)
    s.add_argument("--lr", type=float)
    s.add_argument("--gamma", type=float)
    s.add_argument("--architecture", choices=["toy", "tabular"])
    s.add_argument("--output-activation", dest="output_activation",
                   choices=["relu", "identity"])
    s.add_argument("--eval-every", dest="eval_every", type=int)
    s.add_argument("--n-val-pairs", dest="n_val_pairs", type=int)
    s.add_argument("--valid-fraction", dest="valid_fraction", type=float)

    s = sub.add_parser("eval-pairs", parents=[common], help="pairwise same-dataset accuracy")
    s.add_argument("--manifest")
    s.add_argument("--checkpoint")
    s.add_argument("--split")
    s.add_argument("--fold", type=int)
    s.add_argument("--folds", type=int)
    s.add_argument("--n-pairs", dest="n_pairs", type=int)
    s.add_argument("--threshold", type=float)
    s.add_argument("--gamma", type=float)
    s.add_argument("--baseline", choices=["none", "mf1"])
    s.add_argument("--architecture", choices=["toy", "tabular"])

    s = sub.add_parser("extract", parents=[common], help="meta-features of every dataset")
    s.add_argument("--manifest")
    s.add_argument("--checkpoint")
    s.add_argument("--batches", type=int)
    s.add_argument("--architecture", choices=["toy", "tabular"])

    s = sub.add_parser("embed-mds", parents=[common], help="2-D MDS of a meta-feature CSV")
    s.add_argument("--features")
    s.add_argument("--manifest")

    s = sub.add_parser("synth-surrogate", parents=[common], help="synthetic surrogate corpus")
    s.add_argument("--count", type=int)
    s.add_argument("--subsample", type=int)

    s = sub.add_parser("hpo", parents=[common], help="warm-start HPO comparison")
    s.add_argument("--corpus")
    s.add_argument("--checkpoint")
    s.add_argument("--methods", nargs="+")
    s.add_argument("--seeds", type=int)
    s.add_argument("--budget", type=int)
    s.add_argument("--n-init", dest="n_init", type=int)
    s.add_argument("--n-neighbors", dest="n_neighbors", type=int)
    s.add_argument("--batches", type=int)
    return p


_NOT_CONFIG = {"command", "config", "out", "verbose"}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        file_doc = cfgmod.load_config_file(args.config) if args.config else None
        overrides = {k: v for k, v in vars(args).items() if k not in _NOT_CONFIG}
        cfg = cfgmod.resolve(args.command, file_doc, overrides)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        cfgmod.write_resolved(cfg, args.command, out / "config.json")
        COMMANDS[args.command](cfg, out)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except Exception as err:  # noqa: BLE001 - report and map to exit status 1
        log.debug("command failed", exc_info=True)
        print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
