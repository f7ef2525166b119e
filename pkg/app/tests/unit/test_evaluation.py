import itertools

import numpy as np
import pytest

from bionic.errors import DataValidationError
from bionic.evaluation import CVResult, FoldMetrics, RegimeTable, auc, bacc, multiclass_auc, stratified_folds


def _brute_auc(scores, labels):
    pos = [s for s, y in zip(scores, labels) if y]
    neg = [s for s, y in zip(scores, labels) if not y]
    total = sum(1.0 if p > n else 0.5 if p == n else 0.0 for p, n in itertools.product(pos, neg))
    return total / (len(pos) * len(neg))


def test_auc_known_values():
    assert auc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]) == pytest.approx(0.75)
    assert auc([1, 2, 3], [0, 1, 1]) == 1.0
    assert auc([3, 2, 1], [0, 1, 1]) == 0.0
    assert auc([0.5, 0.5, 0.5, 0.5], [0, 1, 0, 1]) == 0.5


def _brute_bacc(preds, labels):
    recalls = []
    for c in sorted(set(labels)):
        members = [p for p, y in zip(preds, labels) if y == c]
        recalls.append(sum(p == c for p in members) / len(members))
    return sum(recalls) / len(recalls)


def test_auc_matches_pairwise_count_on_random_instances():
    rng = np.random.default_rng(0)
    checked = single = 0
    for _ in range(1000):
        n = int(rng.integers(2, 21))
        # few distinct levels so most instances carry ties
        scores = rng.integers(0, int(rng.integers(2, 6)), size=n).astype(float)
        labels = rng.integers(0, 2, size=n)
        if labels.min() == labels.max():
            single += 1
            with pytest.raises(DataValidationError):
                auc(scores, labels)
            continue
        assert auc(scores, labels) == pytest.approx(_brute_auc(scores, labels), abs=1e-12)
        checked += 1
    assert checked > 800 and single > 0


def test_bacc_matches_per_class_recall_on_random_instances():
    rng = np.random.default_rng(1)
    for _ in range(1000):
        n = int(rng.integers(1, 21))
        c = int(rng.integers(1, 5))
        labels = rng.integers(0, c, size=n)
        preds = rng.integers(0, c, size=n)
        assert bacc(preds, labels) == pytest.approx(_brute_bacc(preds.tolist(), labels.tolist()), abs=1e-12)


def test_auc_single_class():
    with pytest.raises(DataValidationError):
        auc([0.1, 0.2], [1, 1])


def test_multiclass_auc_macro_average():
    proba = np.array([[0.8, 0.1, 0.1], [0.1, 0.8, 0.1], [0.1, 0.1, 0.8], [0.6, 0.3, 0.1]])
    assert multiclass_auc(proba, [0, 1, 2, 0]) == 1.0
    binary = np.array([[0.9, 0.1], [0.2, 0.8]])
    assert multiclass_auc(binary, [0, 1]) == 1.0


def test_bacc_values():
    assert bacc([0, 0, 1, 1], [0, 0, 1, 1]) == 1.0
    assert bacc([0, 0, 0, 0], [0, 0, 0, 1]) == pytest.approx(0.5)
    assert bacc([1, 0, 1, 1, 1], [0, 0, 1, 1, 1]) == pytest.approx((0.5 + 1.0) / 2)
    with pytest.raises(DataValidationError):
        bacc([], [])


def test_folds_partition_and_balance():
    labels = np.array([0] * 30 + [1] * 20)
    folds = stratified_folds(labels, k=5, seed=3)
    allidx = np.concatenate(folds)
    assert sorted(allidx.tolist()) == list(range(50))
    for f in folds:
        assert np.bincount(labels[f], minlength=2).tolist() == [6, 4]
    again = stratified_folds(labels, k=5, seed=3)
    assert all(np.array_equal(a, b) for a, b in zip(folds, again))


def test_fold_count_bounds():
    with pytest.raises(DataValidationError):
        stratified_folds([0, 1, 0, 1], k=1)
    with pytest.raises(DataValidationError):
        stratified_folds([0, 1, 0, 1], k=5)


def test_small_class_warns(caplog):
    folds = stratified_folds([0] * 9 + [1] * 2, k=3, seed=0)
    assert sum(len(f) for f in folds) == 11
    assert "fewer members than folds" in caplog.text


def test_cv_result_frames():
    folds = [FoldMetrics(i, 9, 1, a, b, 3, 40) for i, (a, b) in enumerate([(0.9, 0.8), (None, 0.6), (0.7, 0.7)])]
    res = CVResult("ss", folds, 0.8, np.std([0.9, 0.7], ddof=1), 0.7, 0.1)
    frame = res.to_frame()
    assert list(frame["fold"])[-2:] == ["mean", "sd"]
    assert res.summary().startswith("regime=ss AUC 0.800 ± 0.141")
    table = RegimeTable({"s": res, "ss": res}).formatted()
    assert list(table.index) == ["S", "SS"]
    assert table.loc["S", "BACC"] == "0.700 ± 0.100"
