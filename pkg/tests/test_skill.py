import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from microseg.labels import SkillLevel
from microseg.skill import (
    GBCModel,
    Protocol,
    argmax_with_prior,
    best_split,
    confusion_matrix,
    cross_validate,
    discretize,
    evaluate,
    fit_tree,
    gbc_fit,
    gbc_predict,
    per_class_metrics,
    predict_labels,
    predict_proba,
    summary_report,
)
from oracles import best_split_exhaustive


def blobs(n_per, seed=0, sep=4.0, p=3):
    rng = np.random.default_rng(seed)
    X = np.concatenate([rng.normal(k * sep, 1.0, size=(n_per, p)) for k in range(3)])
    y = np.repeat(np.arange(3), n_per)
    return X, y


@given(st.floats(1.0, 5.0), st.floats(1.0, 5.0))
def test_discretize_is_monotone(a, b):
    if a <= b:
        assert discretize(a) <= discretize(b)


def test_discretize_boundaries():
    assert discretize(2.4999) == SkillLevel.POOR
    assert discretize(2.5) == SkillLevel.MODERATE
    assert discretize(3.5) == SkillLevel.GOOD
    for bad in (0.9, 5.1, float("nan"), "3"):
        with pytest.raises(ValueError):
            discretize(bad)


def exhaustive_tree(X, r, depth, max_depth, min_samples):
    """Recursive reference built on the exhaustive split search; returns predictions."""
    def grow(idx, d):
        out = np.full(len(X), np.nan)
        if d >= max_depth or len(idx) < max(2, min_samples):
            out[idx] = r[idx].mean()
            return out
        gain, f, thr = best_split_exhaustive(X[idx], r[idx])
        if f is None:
            out[idx] = r[idx].mean()
            return out
        left = idx[X[idx, f] <= thr]
        right = idx[X[idx, f] > thr]
        a, b = grow(left, d + 1), grow(right, d + 1)
        out[left], out[right] = a[left], b[right]
        return out
    return grow(np.arange(len(X)), depth)


@pytest.mark.parametrize("seed", range(10))
def test_best_split_equals_exhaustive_search(seed):
    rng = np.random.default_rng(seed)
    n, p = int(rng.integers(2, 100)), int(rng.integers(1, 6))
    X = rng.normal(size=(n, p))
    r = rng.normal(size=n)
    got = best_split(X, r)
    gain, f, thr = best_split_exhaustive(X, r)
    if f is None:
        assert got is None
    else:
        assert (got.feature, got.threshold) == (f, thr)
        assert got.gain == pytest.approx(gain, rel=1e-9)


@pytest.mark.parametrize("seed", range(5))
def test_fit_tree_equals_exhaustive_tree(seed):
    rng = np.random.default_rng(100 + seed)
    X = rng.normal(size=(80, 4))
    r = rng.normal(size=80)
    tree = fit_tree(X, r, max_depth=3, min_samples=2)
    assert np.allclose(tree.predict(X), exhaustive_tree(X, r, 0, 3, 2), atol=1e-12)


def test_split_ties_prefer_lowest_feature_and_threshold():
    X = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [3.0, 3.0]])
    r = np.array([1.0, 1.0, -1.0, -1.0])
    s = best_split(X, r)
    assert (s.feature, s.threshold) == (0, 1.5)
    assert best_split(np.ones((4, 2)), r) is None
    assert best_split(X, np.ones(4)) is None


def test_newton_leaves_and_validation():
    X = np.array([[0.0], [1.0]])
    tree = fit_tree(X, [1.0, 3.0], hessians=[0.5, 0.5], max_depth=0, leaf_scale=0.5)
    assert tree.predict(X).tolist() == [2.0, 2.0]  # 0.5 * 4 / 1
    with pytest.raises(ValueError):
        fit_tree(X, [1.0])
    with pytest.raises(ValueError):
        fit_tree(X, [1.0, 2.0], max_depth=-1)


def test_separable_data_fits_within_50_rounds():
    X, y = blobs(20)
    model = gbc_fit(X, y, rounds=50, max_depth=2)
    assert np.mean(predict_labels(model, X) == y) == 1.0
    assert all(b <= a + 1e-12 for a, b in zip(model.train_loss, model.train_loss[1:]))


def test_zero_rounds_is_the_null_model():
    X, y = blobs(5)
    y = np.array([0] * 4 + [1] * 6 + [2] * 5)
    model = gbc_fit(X, y, rounds=0)
    P = predict_proba(model, X)
    assert np.allclose(P, 1 / 3)
    assert set(predict_labels(model, X)) == {1}  # ties go to the most frequent class


def test_argmax_with_prior_ties():
    P = np.array([[0.4, 0.4, 0.2], [0.2, 0.4, 0.4], [0.5, 0.3, 0.2]])
    assert argmax_with_prior(P, np.array([0.2, 0.5, 0.3])).tolist() == [1, 1, 0]
    assert argmax_with_prior(np.full((1, 3), 1 / 3), np.full(3, 1 / 3)).tolist() == [0]


def test_duplicating_the_data_keeps_predictions():
    X, y = blobs(10, seed=3, sep=1.5)
    # min_samples=1 so the doubled set cannot split where the original could not
    a = gbc_fit(X, y, rounds=20, max_depth=2, min_samples=1)
    b = gbc_fit(np.vstack([X, X]), np.concatenate([y, y]), rounds=20, max_depth=2, min_samples=1)
    assert np.allclose(predict_proba(a, X), predict_proba(b, X), atol=1e-9)


def test_monotone_feature_transform_keeps_training_fit():
    X, y = blobs(10, seed=4, sep=1.0)
    a = gbc_fit(X, y, rounds=15)
    b = gbc_fit(np.exp(X), y, rounds=15)
    assert np.array_equal(predict_labels(a, X), predict_labels(b, np.exp(X)))


def test_model_serialization_round_trip(tmp_path):
    X, y = blobs(8, seed=5)
    model = gbc_fit(X, y, rounds=10, schema="microseg-features/1")
    model.save(tmp_path / "m.json")
    back = GBCModel.load(tmp_path / "m.json")
    assert np.array_equal(predict_proba(back, X), predict_proba(model, X))
    assert json.loads((tmp_path / "m.json").read_text())["format"] == "microseg-gbc/1"
    probs, label = gbc_predict(back, X[0], schema="microseg-features/1")
    assert probs.sum() == pytest.approx(1.0) and label == predict_labels(model, X[:1])[0]
    with pytest.raises(ValueError):
        gbc_predict(back, X[0], schema="other")
    with pytest.raises(ValueError):
        GBCModel.from_dict({"format": "x"})


def test_fit_validation():
    X = np.zeros((4, 2))
    with pytest.raises(ValueError):
        gbc_fit(X, [0, 0, 0, 0])
    with pytest.raises(ValueError):
        gbc_fit(X, [0, 1, 2, 3])
    with pytest.raises(ValueError):
        gbc_fit(X, [0, 1, 0, 1], subsample=0.0)
    with pytest.raises(ValueError):
        gbc_fit(X[:3], [0, 1, 0, 1])


def test_subsampling_is_seeded():
    X, y = blobs(10, seed=6, sep=1.0)
    a = gbc_fit(X, y, rounds=5, subsample=0.5, seed=1)
    b = gbc_fit(X, y, rounds=5, subsample=0.5, seed=1)
    assert np.array_equal(predict_proba(a, X), predict_proba(b, X))


def test_hand_computed_metrics():
    cm = np.array([[8, 1, 1], [2, 6, 2], [0, 3, 7]])
    m = per_class_metrics(cm)
    # precision: 8/10, 6/10, 7/10 ; recall: 8/10, 6/10, 7/10
    assert np.allclose(m["precision"], [0.8, 0.6, 0.7])
    assert np.allclose(m["recall"], [0.8, 0.6, 0.7])
    assert np.allclose(m["f1"], [0.8, 0.6, 0.7])
    assert np.trace(cm) / cm.sum() == pytest.approx(0.7)
    assert per_class_metrics(np.zeros((3, 3)))["f1"].tolist() == [0, 0, 0]


def test_confusion_matrix_counts():
    cm = confusion_matrix([0, 0, 1, 2, 2], [0, 1, 1, 2, 0])
    assert cm.tolist() == [[1, 1, 0], [0, 1, 0], [1, 0, 1]]


def test_evaluate_on_separable_data_is_deterministic():
    X, y = blobs(15, seed=7)
    proto = Protocol(folds=3, rounds_grid=(5, 10), depth_grid=(1, 2))
    a = evaluate(X, y, proto, "demo")
    b = evaluate(X, y, proto, "demo")
    assert a.accuracy == 1.0 and a.n_test == 9
    assert a.to_dict() == b.to_dict()
    assert set(a.cv_scores) == {(5, 1), (5, 2), (10, 1), (10, 2)}
    assert summary_report([a])["mean_accuracy"] == 1.0


def test_cross_validate_warns_on_tiny_classes():
    X, y = blobs(2, seed=8)
    with pytest.warns(UserWarning):
        cross_validate(X, y, Protocol(folds=5, select=False, default_rounds=3))
