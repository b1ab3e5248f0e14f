import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from metafeat.data import TabularDataset
from metafeat.encoder import SetEncoder
from metafeat.sampling import LabeledPair, PairStream, full_batch, sample_batch
from metafeat.similarity import (EngineeredSimilarity, SimilarityModel, TrainConfig,
                                 TrainingDiverged, evaluate_pairs, pair_loss, similarity,
                                 similarity_from_distance, train, write_train_log)

from gradcheck import PairLossOracle, analytic_grads, relative_errors

TINY = {"f": [("dense", 2)], "g": [("dense", 2)], "h": [("dense", 2)]}


def passthrough_model(gamma=1.0):
    """Encoder whose meta-features are the batch means of (x, y)."""
    enc = SetEncoder(layout=TINY, output_activation="identity")
    for p in enc.parameters():
        p.data = np.eye(2) if p.data.shape == (2, 2) else np.zeros_like(p.data)
    return SimilarityModel(enc, gamma)


def const_batch(value, name, n=16):
    return full_batch(TabularDataset(np.full((n, 1), value), np.ones((n, 1)), name))


def test_analytic_similarities():
    assert similarity_from_distance(math.log(2), 1.0) == pytest.approx(0.5, abs=1e-15)
    assert similarity_from_distance(10.0, 0.1) == pytest.approx(math.exp(-1), abs=1e-15)


def test_similarity_through_encoder():
    m = passthrough_model()
    a, b = const_batch(0.0, "a"), const_batch(math.log(2), "b")
    assert similarity(m, a, b) == pytest.approx(0.5, abs=1e-12)
    assert similarity(m, a, a) == 1.0


def test_loss_at_half_probability_is_two_ln2():
    m = passthrough_model()
    a, b = const_batch(0.0, "a"), const_batch(math.log(2), "b")
    loss = pair_loss(m, [LabeledPair(a, b, 1), LabeledPair(a, b, 0)]).item()
    assert loss == pytest.approx(2 * math.log(2), abs=1e-12)


def test_loss_needs_both_labels():
    m = passthrough_model()
    a = const_batch(0.0, "a")
    with pytest.raises(ValueError):
        pair_loss(m, [LabeledPair(a, a, 1)])


def test_gamma_must_be_positive():
    with pytest.raises(ValueError):
        SimilarityModel(SetEncoder(layout=TINY), 0.0)


def meta(n=4, seed=0):
    rng = np.random.default_rng(seed)
    return [TabularDataset(rng.uniform(size=(64, 3)) ** (i + 1),
                           np.eye(2)[rng.integers(0, 2, 64)], f"d{i}") for i in range(n)]


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 1000))
def test_similarity_range_and_monotone(seed):
    rng = np.random.default_rng(seed)
    d = np.sort(rng.exponential(size=20))
    p = similarity_from_distance(d, 0.7)
    assert np.all((p > 0) & (p <= 1))
    assert np.all(np.diff(p) <= 0)
    assert similarity_from_distance(0.0, 0.7) == 1.0


def test_loss_invariant_to_order_and_swap():
    m = SimilarityModel(SetEncoder("toy", seed=2))
    pairs = PairStream(meta(), np.random.default_rng(1)).take(6)
    base = pair_loss(m, pairs).item()
    shuffled = [pairs[i] for i in (3, 0, 5, 1, 4, 2)]
    swapped = [LabeledPair(p.right, p.left, p.same) for p in pairs]
    assert pair_loss(m, shuffled).item() == pytest.approx(base, rel=1e-12)
    assert pair_loss(m, swapped).item() == pytest.approx(base, rel=1e-12)


def test_loss_gradient_small_encoder():
    layout = {"f": [("dense", 4), ("residual", 2, 4)], "g": [("dense", 3)],
              "h": [("dense", 3)]}
    m = SimilarityModel(SetEncoder(layout=layout, seed=5, output_activation="identity"), 0.5)
    for p in m.encoder.parameters():
        if p.shape[0] == 1:
            p.data = np.random.default_rng(1).normal(scale=0.1, size=p.shape)
    pairs = PairStream(meta(), np.random.default_rng(3)).take(4)
    oracle = PairLossOracle(m.encoder, pairs, m.gamma)
    assert oracle.loss() == pytest.approx(pair_loss(m, pairs).item(), rel=1e-12)
    numeric, unresolved = oracle.numeric_grads(h=1e-4)
    analytic = analytic_grads(lambda: pair_loss(m, pairs), oracle.params)
    assert unresolved == 0
    assert relative_errors(analytic, numeric, floor=1e-6).max() < 1e-4


def separable():
    z = TabularDataset(np.zeros((64, 2)), np.eye(2)[np.arange(64) % 2], "zeros")
    o = TabularDataset(np.ones((64, 2)), np.eye(2)[np.arange(64) % 2], "ones")
    return [z, o]


def test_separable_sanity_run():
    cfg = TrainConfig(steps=200, eval_every=50, n_val_pairs=100, valid_fraction=0.0)
    model = train(separable(), cfg)
    assert model.history[-1][2] == 1.0
    assert evaluate_pairs(model, separable(), 200).accuracy == 1.0


def test_zero_steps_forbidden():
    with pytest.raises(ValueError):
        TrainConfig(steps=0)


def test_training_is_deterministic(tmp_path):
    cfg = TrainConfig(steps=20, eval_every=10, n_val_pairs=20, seed=4)
    a, b = train(meta(6), cfg), train(meta(6), cfg)
    assert a.history == b.history
    assert abs(a.history[-1][1] - b.history[-1][1]) <= 1e-12
    write_train_log(a.history, tmp_path / "log.csv")
    assert (tmp_path / "log.csv").read_text().splitlines()[0] == "step,loss,val_accuracy"


def test_nan_data_reports_divergence():
    bad = [TabularDataset(np.full((32, 2), np.nan), np.eye(2)[np.arange(32) % 2], "nan"),
           TabularDataset(np.zeros((32, 2)), np.eye(2)[np.arange(32) % 2], "ok")]
    with pytest.raises(TrainingDiverged) as info:
        train(bad, TrainConfig(steps=5, valid_fraction=0.0, n_val_pairs=4))
    assert all(np.all(np.isfinite(p.data)) for p in info.value.model.encoder.parameters())


class Constant:
    gamma = 1.0

    def similarities(self, pairs):
        return np.ones(len(pairs))


def test_constant_classifier_scores_half():
    assert evaluate_pairs(Constant(), meta(), 1000).accuracy == 0.5


def test_evaluation_labels_balanced():
    pairs = PairStream(meta(), np.random.default_rng(0)).take(1001)
    pos = sum(p.same for p in pairs)
    assert abs(pos - (len(pairs) - pos)) <= 1


def test_evaluation_needs_two_datasets():
    with pytest.raises(ValueError):
        evaluate_pairs(Constant(), meta(1), 10)


def test_engineered_baseline_shapes():
    base = EngineeredSimilarity.fit(meta(), np.random.default_rng(0), gamma=0.1, n_batches=50)
    pairs = PairStream(meta(), np.random.default_rng(1)).take(10)
    p = base.similarities(pairs)
    assert p.shape == (10,) and np.all((p > 0) & (p <= 1))
    b = sample_batch(meta()[0], np.random.default_rng(2))
    assert base.embed([b]).shape == (1, 22)
