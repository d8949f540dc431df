import re

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import auc_pairwise
from riga.classify import (
    CnnConfig,
    EvalResult,
    GbdtConfig,
    PipelineSpec,
    auc,
    best_split,
    cnn_train,
    cross_validate,
    fit_boosted_trees,
    format_mean_std,
    grid_search,
    grid_search_cnn,
    split_gain,
)
from riga.data import kfold_split, synth_imbalanced

labelled = st.integers(2, 40).flatmap(
    lambda n: st.tuples(
        st.lists(st.integers(0, 6), min_size=n, max_size=n),
        st.lists(st.integers(0, 1), min_size=n, max_size=n),
    )
)


def test_auc_hand_cases():
    assert auc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]) == 0.75
    assert auc([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]) == 1.0
    assert auc([0.3] * 6, [0, 1, 0, 1, 1, 0]) == 0.5


def test_auc_single_class():
    with pytest.raises(ValueError):
        auc([0.1, 0.2], [1, 1])


def test_auc_matches_pairwise_on_100_tied_instances():
    rng = np.random.default_rng(7)
    for _ in range(100):
        n = int(rng.integers(2, 60))
        labels = rng.integers(0, 2, n)
        labels[:2] = [0, 1]
        # a coarse integer grid guarantees plenty of ties
        scores = rng.integers(0, 5, n) / 4.0
        assert abs(auc(scores, labels) - auc_pairwise(scores, labels)) <= 1e-12


@given(labelled)
def test_auc_pairwise_property(data):
    scores, labels = data
    if len(set(labels)) < 2:
        return
    assert abs(auc(scores, labels) - auc_pairwise(scores, labels)) <= 1e-12


@given(labelled)
def test_auc_monotone_invariance(data):
    scores, labels = data
    if len(set(labels)) < 2:
        return
    s = np.asarray(scores, dtype=np.float64)
    assert auc(s, labels) == auc(np.exp(3 * s) - 7, labels)


def test_gbdt_stump_separable():
    x = np.linspace(0, 1, 40)[:, None]
    y = (x[:, 0] > 0.6).astype(float)
    model = fit_boosted_trees(x, y, GbdtConfig(n_trees=10, max_depth=1))
    assert auc(model.scores(x), y) == 1.0


def test_gbdt_zero_trees_prior():
    x = np.arange(10.0)[:, None]
    y = np.r_[np.ones(3), np.zeros(7)]
    model = fit_boosted_trees(x, y, GbdtConfig(n_trees=0))
    np.testing.assert_allclose(model.margin(x), np.log(3 / 7), rtol=0, atol=1e-15)


def test_gbdt_constant_features_prior_only():
    model = fit_boosted_trees(np.ones((6, 2)), [0, 1, 0, 1, 1, 1])
    assert model.trees == []


def test_gbdt_hand_tree():
    # base margin 0, so g = 0.5 - y and h = 0.25 for every row; lambda = 1.
    # split between x=2 and x=3: GL = 1, HL = 0.5, GR = -1, HR = 0.5
    # gain = 0.5 * (1/1.5 + 1/1.5 - 0) = 2/3; leaves -GL/(HL+1) = -2/3, +2/3
    x = np.array([[1.0], [2.0], [3.0], [4.0]])
    y = np.array([0, 0, 1, 1])
    model = fit_boosted_trees(x, y, GbdtConfig(n_trees=1, max_depth=1, learning_rate=1.0))
    root = model.trees[0]
    assert model.base_margin == 0.0
    assert root.feature == 0 and root.threshold == 2.5
    assert abs(root.gain - 2 / 3) <= 1e-15
    assert abs(root.left.value + 2 / 3) <= 1e-15 and abs(root.right.value - 2 / 3) <= 1e-15


@given(st.integers(0, 10_000), st.integers(2, 12), st.integers(1, 3))
def test_split_gain_brute_force(seed, n, d):
    rng = np.random.default_rng(seed)
    x = rng.integers(0, 4, (n, d)).astype(float)
    g, h = rng.standard_normal(n), rng.uniform(0.05, 0.25, n)
    best = -np.inf
    for f in range(d):
        for t in np.unique(x[:, f])[1:]:
            left = x[:, f] < t
            gain = split_gain(g[left].sum(), h[left].sum(), g[~left].sum(), h[~left].sum(), 1.0)
            best = max(best, gain)
    order = np.argsort(x, axis=0, kind="mergesort").T.copy()
    xs = np.take_along_axis(x.T, order, axis=1)
    got, f, thr = best_split(xs, order, g, h, np.ones(n, dtype=bool), 1.0, 1)
    if best == -np.inf:
        assert f == -1
    else:
        assert abs(got - best) <= 1e-12
        left = x[:, f] < thr
        redo = split_gain(g[left].sum(), h[left].sum(), g[~left].sum(), h[~left].sum(), 1.0)
        assert abs(redo - best) <= 1e-12


def test_gbdt_deterministic(rng):
    x = rng.standard_normal((60, 4))
    y = (x[:, 0] + 0.3 * rng.standard_normal(60) > 0).astype(float)
    cfg = GbdtConfig(n_trees=20, subsample=0.7, seed=3)
    a, b = fit_boosted_trees(x, y, cfg), fit_boosted_trees(x, y, cfg)
    assert np.array_equal(a.margin(x), b.margin(x))


def distinct_images(n=50, g=6):
    rng = np.random.default_rng(0)
    return rng.uniform(size=(n, g, g)), np.r_[np.zeros(n // 2), np.ones(n - n // 2)].astype(int)


def test_cnn_memorizes():
    images, labels = distinct_images()
    cfg = CnnConfig(conv_blocks=((8, 3),), dense_widths=(64,), epochs=150, learning_rate=3e-3, batch_size=50)
    model = cnn_train(images, labels, cfg)
    assert np.array_equal(model.scores(images) > 0.5, labels == 1)


def test_cnn_identical_images_prior():
    images = np.full((40, 6, 6), 0.5)
    labels = np.r_[np.ones(10), np.zeros(30)].astype(int)
    cfg = CnnConfig(conv_blocks=((4, 3),), dense_widths=(8,), epochs=60, learning_rate=1e-2, batch_size=40)
    scores = cnn_train(images, labels, cfg).scores(images)
    np.testing.assert_allclose(scores, 0.25, atol=0.02)


def test_cnn_deterministic():
    images, labels = distinct_images(20)
    cfg = CnnConfig(conv_blocks=((4, 3),), dense_widths=(8,), epochs=3)
    a = cnn_train(images, labels, cfg).scores(images)
    assert np.array_equal(a, cnn_train(images, labels, cfg).scores(images))


def test_cnn_single_class():
    with pytest.raises(ValueError):
        cnn_train(np.zeros((4, 6, 6)), np.ones(4, dtype=int))


def test_grid_search_rules():
    assert grid_search(["only"], lambda p: 0.3) == ("only", [0.3])
    assert grid_search(["a", "b", "c"], {"a": 0.6, "b": 0.8, "c": 0.8}.get)[0] == "b"
    with pytest.raises(ValueError):
        grid_search([], lambda p: 0.0)


def test_grid_search_cnn_dominating_config():
    rng = np.random.default_rng(1)
    labels = np.r_[np.zeros(30), np.ones(30)].astype(int)
    images = rng.uniform(0, 0.2, size=(60, 6, 6))
    images[labels == 1, :, :3] += 0.7
    useless = CnnConfig(conv_blocks=((4, 3),), dense_widths=(8,), epochs=1, learning_rate=0.0)
    good = CnnConfig(conv_blocks=((4, 3),), dense_widths=(8,), epochs=30, learning_rate=1e-2, batch_size=16)
    best, values = grid_search_cnn(images, labels, [useless, good], k=3)
    assert best is good and values[1] > values[0]


def test_eval_result_rows():
    r = EvalResult([0.7, 0.8, 0.75], "GBDT w/o Augmentation", "toy")
    assert abs(r.mean - np.mean(r.fold_aucs)) <= 1e-15
    assert abs(r.std - np.std(r.fold_aucs, ddof=1)) <= 1e-15
    assert r.row() == "GBDT w/o Augmentation, toy: 0.7500 ± 0.0500"
    assert re.fullmatch(r"\d\.\d{4} ± \d\.\d{4}", format_mean_std(0.7384, 0.0114))
    assert format_mean_std(0.7384, 0.0114) == "0.7384 ± 0.0114"
    with pytest.raises(ValueError):
        EvalResult([1.2], "x")


def test_cross_validate_separable():
    ds = synth_imbalanced(150, 30, 8, 10.0, 0)
    run = cross_validate(ds, kfold_split(ds, 5, 0), PipelineSpec("gbdt", gbdt=GbdtConfig(n_trees=20)))
    assert run.result.mean > 0.95
    assert len(run.folds) == 5
    covered = np.sort(np.concatenate([f.test_index for f in run.folds]))
    assert np.array_equal(covered, np.arange(ds.n_rows))
    assert not np.isnan(run.oof_scores(ds.n_rows)).any()


def test_cross_validate_smote_keeps_tests_real():
    from riga.augment import AugmentConfig

    ds = synth_imbalanced(80, 20, 4, 3.0, 1)
    spec = PipelineSpec("gbdt", AugmentConfig("smote"), gbdt=GbdtConfig(n_trees=10))
    run = cross_validate(ds, kfold_split(ds, 5, 1), spec)
    for f in run.folds:
        assert f.scores.shape == f.test_index.shape
        assert f.n_synthetic == 64 - 16


def test_pipeline_spec_rejects_unknown():
    with pytest.raises(ValueError):
        PipelineSpec("svm")
