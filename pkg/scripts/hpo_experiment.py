"""Warm-start HPO on the synthetic surrogate corpus.

Trains a toy encoder on a separate toy collection (or loads --checkpoint),
then runs random search, plain GP and GP warm-started from learned and
engineered meta-features, leave-one-dataset-out, and writes ADTM curves.

    python scripts/hpo_experiment.py --out runs/hpo
"""

import argparse
import logging
import time
from pathlib import Path

from metafeat.cli import main as cli


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs/hpo")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--checkpoint", help="trained encoder; trains one when omitted")
    ap.add_argument("--datasets", type=int, default=50)
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--budget", type=int, default=20)
    ap.add_argument("--train-steps", type=int, default=2000)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")
    out = Path(args.out)
    start = time.perf_counter()

    def run(*argv):
        code = cli([*map(str, argv), "--seed", str(args.seed)])
        if code:
            raise SystemExit(code)

    ckpt = args.checkpoint
    if ckpt is None:
        run("gen-toy", "--count", 300, "--out", out / "toy")
        run("train", "--manifest", out / "toy" / "manifest.jsonl", "--steps", args.train_steps,
            "--pairs-per-step", 64, "--eval-every", 250, "--out", out / "encoder")
        ckpt = out / "encoder" / "checkpoint.json"
    run("synth-surrogate", "--count", args.datasets, "--out", out / "corpus")
    run("hpo", "--corpus", out / "corpus", "--checkpoint", ckpt, "--seeds", args.seeds,
        "--budget", args.budget, "--out", out / "hpo")
    logging.info("done in %.0fs; curves in %s", time.perf_counter() - start,
                 out / "hpo" / "adtm.csv")


if __name__ == "__main__":
    main()
