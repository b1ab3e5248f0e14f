import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from metafeat.engineered import engineered_mf
from metafeat.hpo import ConfigGrid, SurrogateTable, synth_surrogate
from metafeat.hpo.gp import GaussianProcess, distances, expected_improvement, fit_gp, matern32
from metafeat.hpo.search import (HpoRun, adtm, adtm_curve, gp_smbo, normalized_regret,
                                 random_search, warm_start)
from metafeat.hpo.surrogate import latent_optima, optimum_for, surrogate_errors


@pytest.fixture(scope="module")
def grid():
    return ConfigGrid()


def table3():
    return SurrogateTable("t", np.array([0.2, 0.5, 0.8]))


def run_of(trials, table):
    r = HpoRun("x", dataset=table.name)
    for i in trials:
        r.add(i, table.errors[i])
    return r


# ---------------------------------------------------------------- ADTM


def test_adtm_hand_examples():
    t = table3()
    tables = {"t": t}
    half = (0.5 - 0.2) / (0.8 - 0.2)
    assert half == pytest.approx(0.5, abs=1e-15)
    assert adtm({"t": run_of([2, 1], t)}, tables, 2) == half
    assert adtm({"t": run_of([1, 2], t)}, tables, 2) == half
    assert adtm({"t": run_of([2], t)}, tables, 1) == 1.0
    assert all(adtm({"t": run_of([0, 2, 1], t)}, tables, k) == 0.0 for k in (1, 2, 3))


def test_adtm_averages_datasets():
    a, b = table3(), SurrogateTable("b", np.array([1.0, 0.0, 0.5]))
    runs = {"t": run_of([1], a), "b": run_of([2], b)}
    assert adtm(runs, {"t": a, "b": b}, 1) == ((0.5 - 0.2) / (0.8 - 0.2) + 0.5) / 2


def test_adtm_skips_constant_table():
    a, c = table3(), SurrogateTable("c", np.full(3, 0.3))
    runs = {"t": run_of([1], a), "c": run_of([0], c)}
    with pytest.warns(UserWarning, match="constant"):
        assert adtm(runs, {"t": a, "c": c}, 1) == (0.5 - 0.2) / (0.8 - 0.2)


def test_adtm_needs_enough_trials():
    with pytest.raises(ValueError):
        normalized_regret(run_of([1], table3()), table3(), 2)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=4, max_size=30, unique=True), st.integers(0, 999))
def test_adtm_curve_monotone_and_bounded(errors, seed):
    t = SurrogateTable("t", np.array(errors))
    r = random_search(t, len(errors), seed)
    curve = adtm_curve({"t": r}, {"t": t}, len(errors))
    assert np.all(np.diff(curve) <= 0)
    assert np.all((curve >= 0) & (curve <= 1))
    assert curve[-1] == 0.0


def test_trials_never_repeat():
    r = HpoRun("x")
    r.add(3, 0.1)
    with pytest.raises(ValueError):
        r.add(3, 0.1)


# ---------------------------------------------------------------- warm start


def library(*entries):
    return {name: (np.asarray(vec, float), SurrogateTable(name, np.asarray(err, float)))
            for name, vec, err in entries}


def test_warm_start_nearest_best():
    err = np.ones(50)
    err[42] = 0.0
    lib = library(("near", [0.0, 0.1], err), ("far", [5.0, 5.0], np.linspace(0, 1, 50)))
    assert warm_start(np.zeros(2), lib, n_init=1, n_neighbors=1) == [42]


def test_warm_start_identical_vector_ranks_first():
    lib = library(("a", [1.0, 1.0], [0.3, 0.1, 0.2]), ("b", [0.0, 0.0], [0.1, 0.3, 0.2]))
    assert warm_start(np.array([1.0, 1.0]), lib, n_init=1, n_neighbors=2) == [1]


def test_warm_start_round_robin_skips_duplicates():
    # nearest ranks configs 0,1,2,...; second ranks 0,3,1,...
    lib = library(("n1", [0.0], [0.1, 0.2, 0.3, 0.9, 0.8]),
                  ("n2", [1.0], [0.1, 0.3, 0.9, 0.2, 0.8]),
                  ("n3", [9.0], [0.9, 0.9, 0.9, 0.9, 0.1]))
    assert warm_start(np.array([0.0]), lib, n_init=4, n_neighbors=2) == [0, 1, 3, 2]


def test_warm_start_bounds():
    lib = library(("a", [0.0], [0.1, 0.2]))
    with pytest.raises(ValueError):
        warm_start(np.array([0.0]), lib, n_init=3)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 999), st.floats(0.01, 100))
def test_warm_start_scale_invariant(seed, c):
    rng = np.random.default_rng(seed)
    entries = [(f"d{i}", rng.normal(size=3), rng.uniform(size=20)) for i in range(6)]
    target = rng.normal(size=3)
    scaled = [(n, v * c, e) for n, v, e in entries]
    assert warm_start(target, library(*entries), 5, 3) == \
        warm_start(target * c, library(*scaled), 5, 3)


# ---------------------------------------------------------------- GP


def test_matern_closed_form():
    rng = np.random.default_rng(0)
    d = rng.uniform(0, 5, 100)
    var, ell = 1.7, 0.8
    expect = [var * (1 + math.sqrt(3) * x / ell) * math.exp(-math.sqrt(3) * x / ell) for x in d]
    np.testing.assert_allclose(matern32(d, var, ell), expect, rtol=0, atol=1e-12)
    assert matern32(0.0, 2.5, 0.3) == 2.5


def test_distances_match_loops():
    rng = np.random.default_rng(1)
    A, B = rng.normal(size=(4, 3)), rng.normal(size=(5, 3))
    ref = [[math.dist(a, b) for b in B] for a in A]
    np.testing.assert_allclose(distances(A, B), ref, atol=1e-12)


@pytest.mark.parametrize("n", [1, 3, 5])
def test_gp_posterior_matches_dense_inverse(n):
    rng = np.random.default_rng(n)
    X, y = rng.uniform(size=(n, 3)), rng.normal(size=n)
    Xs = rng.uniform(size=(7, 3))
    gp = GaussianProcess(1.3, 0.7).fit(X, y)
    mean, var = gp.predict(Xs)
    d = lambda A, B: np.array([[np.linalg.norm(a - b) for b in B] for a in A])
    K = matern32(d(X, X), 1.3, 0.7) + gp.jitter_used * np.eye(n)
    Ks = matern32(d(Xs, X), 1.3, 0.7)
    Kinv = np.linalg.inv(K)
    np.testing.assert_allclose(mean, Ks @ Kinv @ y, rtol=0, atol=1e-8)
    np.testing.assert_allclose(var, 1.3 - np.sum(Ks @ Kinv * Ks, axis=1), rtol=0, atol=1e-8)


def test_gp_interpolates_observations():
    rng = np.random.default_rng(2)
    X, y = rng.uniform(size=(5, 2)), rng.normal(size=5)
    mean, var = GaussianProcess(1.0, 0.5).fit(X, y).predict(X)
    np.testing.assert_allclose(mean, y, atol=1e-6)
    assert np.all(var < 1e-6)


def test_gp_jitter_escalates(monkeypatch):
    from metafeat.hpo import gp as gpmod
    real = gpmod.cholesky
    calls = []

    def flaky(K, lower):
        calls.append(K[0, 0])
        if len(calls) < 3:
            raise np.linalg.LinAlgError("not positive definite")
        return real(K, lower=lower)

    monkeypatch.setattr(gpmod, "cholesky", flaky)
    gp = GaussianProcess(1.0, 1.0).fit(np.eye(3), np.arange(3.0))
    assert gp.jitter_used == pytest.approx(1e-6)


def test_gp_jitter_gives_up(monkeypatch):
    from metafeat.hpo import gp as gpmod

    def broken(K, lower):
        raise np.linalg.LinAlgError("not positive definite")

    monkeypatch.setattr(gpmod, "cholesky", broken)
    with pytest.raises(np.linalg.LinAlgError):
        GaussianProcess().fit(np.eye(2), np.zeros(2))


def test_lml_grid_prefers_matching_lengthscale():
    rng = np.random.default_rng(3)
    X = rng.uniform(size=(40, 1))
    y = np.sin(X[:, 0] * 2)
    assert fit_gp(X, y).lengthscale >= 1.0


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=1, max_size=20),
       st.lists(st.floats(0, 10), min_size=1, max_size=20), st.floats(-5, 5))
def test_expected_improvement_nonnegative(mu, var, best):
    n = min(len(mu), len(var))
    assert np.all(expected_improvement(np.array(mu[:n]), np.array(var[:n]), best) >= 0)


def test_expected_improvement_values():
    assert expected_improvement([0.0], [0.0], 1.0)[0] == 1.0
    assert expected_improvement([2.0], [0.0], 1.0)[0] == 0.0
    # zero gain with unit sd gives pdf(0)
    assert expected_improvement([1.0], [1.0], 1.0)[0] == pytest.approx(1 / math.sqrt(2 * math.pi))


def test_gp_variance_nonnegative_on_grid(grid):
    rng = np.random.default_rng(4)
    idx = rng.choice(len(grid), 12, replace=False)
    _, var = fit_gp(grid.encoded[idx], rng.normal(size=12)).predict(grid.encoded)
    assert np.all(var >= 0)


# ---------------------------------------------------------------- search


def test_random_search_exhausts_grid():
    t = SurrogateTable("t", np.random.default_rng(0).uniform(size=30))
    r = random_search(t, 30, 1)
    assert sorted(r.trials) == list(range(30))
    assert random_search(t, 10, 5).trials == random_search(t, 10, 5).trials


def test_random_search_first_trial_expectation():
    t = SurrogateTable("t", np.random.default_rng(1).uniform(size=40))
    regrets = [normalized_regret(random_search(t, 1, s), t, 1) for s in range(4000)]
    analytic = np.mean((t.errors - t.y_min) / (t.y_max - t.y_min))
    assert abs(np.mean(regrets) - analytic) < 4 * np.std(regrets) / math.sqrt(4000)


def test_gp_smbo_contract(grid):
    t = SurrogateTable("t", surrogate_errors(grid, grid.encoded[17],
                                             np.random.default_rng(0), noise=0.0))
    r = gp_smbo(t, grid.encoded, [0, 5, 9], 15, seed=0)
    assert r.trials[:3] == [0, 5, 9] and len(set(r.trials)) == 15
    assert np.all(np.diff(r.incumbent()) <= 0)
    assert r.trials == gp_smbo(t, grid.encoded, [0, 5, 9], 15, seed=0).trials
    with pytest.raises(ValueError):
        gp_smbo(t, grid.encoded, [0, 1, 2], 2, seed=0)


def test_gp_smbo_beats_random_on_smooth_table(grid):
    t = SurrogateTable("t", surrogate_errors(grid, grid.encoded[100],
                                             np.random.default_rng(0), noise=0.0))
    gp = np.mean([normalized_regret(gp_smbo(t, grid.encoded, list(
        np.random.default_rng(s).choice(len(grid), 3, replace=False)), 15, s), t, 15)
        for s in range(3)])
    rs = np.mean([normalized_regret(random_search(t, 15, s), t, 15) for s in range(3)])
    assert gp < rs


# ---------------------------------------------------------------- grid / surrogate


def test_grid_encoding(grid):
    assert grid.encoded.shape == (len(grid), 14)
    assert np.all((grid.encoded >= 0) & (grid.encoded <= 1))
    assert len({tuple(r) for r in grid.encoded}) == len(grid)
    assert not any(c["layers"] == 1 and c["layout"] != "square" for c in grid.configs)


def test_grid_manifest_roundtrip(tmp_path, grid):
    grid.write_manifest(tmp_path / "grid.json")
    back = ConfigGrid.read_manifest(tmp_path / "grid.json")
    np.testing.assert_array_equal(back.encoded, grid.encoded)


def test_table_csv_roundtrip(tmp_path, grid):
    t = SurrogateTable("x", np.random.default_rng(0).uniform(size=len(grid)))
    t.write_csv(grid, tmp_path / "x.csv")
    header = (tmp_path / "x.csv").read_text().splitlines()[0]
    assert header.startswith("config_index,activation") and header.endswith(",val_error")
    back = SurrogateTable.read_csv(tmp_path / "x.csv", grid)
    assert back.errors.tobytes() == t.errors.tobytes()


def test_identical_optima_share_best_config(grid):
    opt = latent_optima(grid, 0)
    a = surrogate_errors(grid, optimum_for("moons", 2, opt), np.random.default_rng(1), 0.0)
    b = surrogate_errors(grid, optimum_for("moons", 2, opt), np.random.default_rng(2), 0.0)
    assert np.argmin(a) == np.argmin(b)


def test_surrogate_errors_within_bounds(grid):
    corpus = synth_surrogate(6, grid, seed=1)
    for ds, table in corpus.values():
        assert np.all((table.errors >= 0) & (table.errors <= 1))
        assert table.y_min <= table.errors.min() and table.errors.max() <= table.y_max
        assert not table.constant and ds.n_instances == 200


def test_surrogate_meta_distance_tracks_optimum_distance(grid):
    corpus = synth_surrogate(50, grid, seed=0)
    names = sorted(corpus)
    F = np.array([engineered_mf(corpus[n][0]) for n in names])
    F = (F - F.mean(0)) / np.where(F.std(0) > 0, F.std(0), 1)
    best = np.array([grid.encoded[np.argmin(corpus[n][1].errors)] for n in names])
    iu = np.triu_indices(len(names), 1)
    dm = np.linalg.norm(F[:, None] - F[None], axis=-1)[iu]
    db = np.linalg.norm(best[:, None] - best[None], axis=-1)[iu]
    assert stats.spearmanr(dm, db).correlation > 0


def test_synth_surrogate_needs_two():
    with pytest.raises(ValueError):
        synth_surrogate(1, ConfigGrid(), 0)
