import json

import numpy as np
import pytest

from metafeat.cli import main
from metafeat.config import ConfigError, TrainCommandConfig, resolve
from metafeat.data import load_manifest_datasets
from metafeat.encoder import SetEncoder, extract, read_metafeatures_csv


@pytest.fixture(scope="module")
def toy_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("toy")
    assert main(["gen-toy", "--count", "10", "--subsample", "60", "--seed", "3",
                 "--out", str(out)]) == 0
    return out


def test_gen_toy_outputs(toy_dir):
    lines = (toy_dir / "manifest.jsonl").read_text().splitlines()
    assert len(lines) == 10
    assert len(list((toy_dir / "datasets").glob("*.csv"))) == 10
    assert json.loads((toy_dir / "config.json").read_text())["count"] == 10


def test_gen_toy_is_byte_identical(toy_dir, tmp_path):
    assert main(["gen-toy", "--count", "10", "--subsample", "60", "--seed", "3",
                 "--out", str(tmp_path)]) == 0
    for rel in ["manifest.jsonl", *[f"datasets/{p.name}" for p in
                                    (toy_dir / "datasets").glob("*.csv")]]:
        assert (tmp_path / rel).read_bytes() == (toy_dir / rel).read_bytes()


def test_extract_matches_library(toy_dir, tmp_path):
    manifest = str(toy_dir / "manifest.jsonl")
    assert main(["extract", "--manifest", manifest, "--batches", "1", "--seed", "4",
                 "--out", str(tmp_path)]) == 0
    names, values = read_metafeatures_csv(tmp_path / "metafeatures.csv")
    enc = SetEncoder("toy", seed=4)
    for ds, row in zip(load_manifest_datasets(manifest), values):
        lib = extract(enc, ds, 1, np.random.default_rng(4)).vector
        np.testing.assert_array_equal(row, lib)


def test_unknown_config_field_exits_2(toy_dir, tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"count": 3, "colour": "red"}))
    assert main(["gen-toy", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert "gen-toy.colour" in capsys.readouterr().err


def test_wrong_type_exits_2(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("count: many\n")
    assert main(["gen-toy", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2


def test_missing_input_exits_1(tmp_path, capsys):
    code = main(["extract", "--manifest", str(tmp_path / "nope.jsonl"),
                 "--out", str(tmp_path / "o")])
    assert code == 1
    assert capsys.readouterr().err.startswith("error:")


def test_bad_fold_is_config_error(toy_dir, tmp_path):
    assert main(["train", "--manifest", str(toy_dir / "manifest.jsonl"), "--fold", "7",
                 "--out", str(tmp_path)]) == 2


def test_sectioned_config_file():
    doc = {"seed": 9, "train": {"steps": 5}, "gen-toy": {"count": 1}}
    cfg = resolve("train", doc, {"lr": 0.01, "gamma": None})
    assert (cfg.steps, cfg.seed, cfg.lr, cfg.gamma) == (5, 9, 0.01, 1.0)
    assert isinstance(cfg, TrainCommandConfig)
    with pytest.raises(ConfigError):
        resolve("train", {"steps": 2.5}, {})


def test_embed_mds_too_few_rows(tmp_path):
    f = tmp_path / "mf.csv"
    f.write_text("name,k0\na,0.1\nb,0.2\n")
    assert main(["embed-mds", "--features", str(f), "--out", str(tmp_path)]) == 1


def test_train_eval_extract_pipeline_deterministic(toy_dir, tmp_path):
    manifest = str(toy_dir / "manifest.jsonl")
    outputs = []
    for run in ("a", "b"):
        d = tmp_path / run
        assert main(["train", "--manifest", manifest, "--steps", "6", "--eval-every", "3",
                     "--n-val-pairs", "8", "--seed", "1", "--out", str(d / "train")]) == 0
        ckpt = str(d / "train" / "checkpoint.json")
        assert main(["eval-pairs", "--manifest", manifest, "--checkpoint", ckpt,
                     "--n-pairs", "40", "--out", str(d / "eval")]) == 0
        assert main(["extract", "--manifest", manifest, "--checkpoint", ckpt,
                     "--batches", "2", "--out", str(d / "mf")]) == 0
        assert main(["embed-mds", "--features", str(d / "mf" / "metafeatures.csv"),
                     "--manifest", manifest, "--out", str(d / "mds")]) == 0
        outputs.append([(d / p).read_bytes() for p in (
            "train/checkpoint.json", "train/train_log.csv", "train/split.json",
            "eval/report.json", "mf/metafeatures.csv", "mds/embedding.csv")])
    assert outputs[0] == outputs[1]
    report = json.loads((tmp_path / "a" / "eval" / "report.json").read_text())
    assert report["n_pairs"] == 40
