"""Desk-scale toy similarity experiment.

Generates the toy collection, trains one encoder per fold, scores it and
the engineered baseline on balanced test pairs and exports the fold-0 MDS
embeddings.  Everything lands under --out.

    python scripts/toy_experiment.py --out runs/toy --count 300 --total-steps 10000
"""

import argparse
import json
import logging
import time
from pathlib import Path

import numpy as np
from sklearn.metrics import silhouette_score

from metafeat.data import generate_toy_collection
from metafeat.encoder import SetEncoder, extract, write_metafeatures_csv
from metafeat.mds import classical_mds, write_embedding
from metafeat.sampling import kfold_split
from metafeat.similarity import (EngineeredSimilarity, TrainConfig, evaluate_pairs, train,
                                 write_train_log)


def embed(enc, meta, out_csv):
    feats = [extract(enc, d, 10, np.random.default_rng([i, 6])) for i, d in enumerate(meta)]
    coords = classical_mds(np.array([f.vector for f in feats]), 2)
    write_embedding([d.name for d in meta], coords, [d.kind for d in meta], out_csv)
    return float(silhouette_score(coords, [d.kind for d in meta]))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs/toy")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--count", type=int, default=300)
    ap.add_argument("--folds", type=int, default=5)
    ap.add_argument("--total-steps", type=int, default=10_000)
    ap.add_argument("--pairs-per-step", type=int, default=64)
    ap.add_argument("--test-pairs", type=int, default=2000)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    meta = {d.name: d for _, d in generate_toy_collection(args.count, args.seed, 200)}
    folds = kfold_split(sorted(meta), args.folds, args.seed)
    summary = {"args": vars(args), "folds": []}
    for k, (tr, te) in enumerate(folds):
        train_meta, test_meta = [meta[n] for n in tr], [meta[n] for n in te]
        cfg = TrainConfig(steps=args.total_steps // args.folds,
                          pairs_per_step=args.pairs_per_step, seed=args.seed + k, fold=k,
                          eval_every=250)
        model = train(train_meta, cfg)
        model.encoder.save(out / f"fold{k}_checkpoint.json", {"gamma": model.gamma})
        write_train_log(model.history, out / f"fold{k}_train_log.csv")
        rng = lambda: np.random.default_rng([args.seed, k, 9])  # noqa: E731
        row = {"fold": k, "d2v": evaluate_pairs(model, test_meta, args.test_pairs,
                                                rng=rng()).accuracy}
        fitted = EngineeredSimilarity.fit(train_meta, np.random.default_rng([args.seed, k, 5]))
        for g in (1.0, 0.1):
            base = EngineeredSimilarity(fitted.mean, fitted.std, g)
            row[f"mf1_gamma{g}"] = evaluate_pairs(base, test_meta, args.test_pairs,
                                                  rng=rng()).accuracy
        if k == 0:
            feats = [extract(model.encoder, d, 10, np.random.default_rng([i, 6]))
                     for i, d in enumerate(test_meta)]
            write_metafeatures_csv(feats, out / "fold0_metafeatures.csv")
            row["silhouette_trained"] = embed(model.encoder, test_meta,
                                              out / "fold0_embedding.csv")
            row["silhouette_untrained"] = embed(SetEncoder("toy", seed=args.seed), test_meta,
                                                out / "fold0_embedding_untrained.csv")
        logging.info("fold %d: %s", k, row)
        summary["folds"].append(row)
    for key in ("d2v", "mf1_gamma1.0", "mf1_gamma0.1"):
        summary[key] = float(np.mean([r[key] for r in summary["folds"]]))
    summary["seconds"] = time.perf_counter() - start
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    print(json.dumps({k: v for k, v in summary.items() if k != "folds"}, indent=2))


if __name__ == "__main__":
    main()
