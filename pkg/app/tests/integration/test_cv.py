import numpy as np
import pytest

import bionic.inference as inference
from bionic.dataset import LabelBlock, MultiViewDataset, subset
from bionic.evaluation import run_cv, run_regime_experiment
from bionic.model import Hyperparams
from bionic.settings import settings
from bionic.synthetic import SyntheticSpec, generate_synthetic, inject_missingness


@pytest.fixture
def seen_rows(monkeypatch):
    """Record the sample ids every preprocessing fit was estimated on."""
    calls = []
    original = inference.fit_preprocess

    def spy(d, *args, **kwargs):
        calls.append(set(d.ids))
        return original(d, *args, **kwargs)

    monkeypatch.setattr(inference, "fit_preprocess", spy)
    return calls


def test_supervised_cv_covers_every_labeled_sample_once(synth, fast_hyper, seen_rows):
    d = synth.dataset
    res = run_cv(d, fast_hyper, regime="s", k=4, seed=0)
    assert len(res.folds) == 4
    assert sorted(res.predictions["id"]) == sorted(d.ids)
    assert sum(f.n_test for f in res.folds) == d.n
    for f in res.folds:
        assert f.n_train + f.n_test == d.n
        assert 0.0 <= f.bacc <= 1.0
    assert 0.0 <= res.bacc_mean <= 1.0 and res.bacc_sd >= 0.0
    # preprocessing of each fold sees exactly the training rows
    assert len(seen_rows) == 4
    for fold in range(4):
        test_ids = set(res.predictions.loc[res.predictions["fold"] == fold, "id"])
        assert set(d.ids) - test_ids in seen_rows


def test_transductive_cv_preprocesses_on_test_inputs(synth, fast_hyper, seen_rows):
    d = synth.dataset
    run_cv(d, fast_hyper, regime="tss", k=4, seed=0)
    assert len(seen_rows) == 4
    assert all(rows == set(d.ids) for rows in seen_rows)


def test_unlabeled_rows_stay_in_every_training_split(synth, fast_hyper, seen_rows):
    d = synth.dataset
    classes = d.labels.classes.copy()
    classes[:8] = -1
    partial = MultiViewDataset(specs=d.specs, blocks=d.blocks, labels=LabelBlock.from_classes(classes, 2), ids=d.ids)
    res = run_cv(partial, fast_hyper, regime="ss", k=3, seed=1)
    unlabeled = set(d.ids[:8])
    assert all(unlabeled <= rows for rows in seen_rows)
    assert not unlabeled & set(res.predictions["id"])


def test_extra_unlabeled_rows_feed_semi_supervised_folds(synth, fast_hyper, seen_rows):
    d = subset(synth.dataset, np.arange(60))
    extra = subset(synth.dataset, np.arange(60, 80))
    extra = MultiViewDataset(
        specs=extra.specs, blocks=extra.blocks, labels=extra.labels, ids=tuple(f"u{i}" for i in range(extra.n))
    )
    run_cv(d, fast_hyper, regime="ss", k=3, seed=0, extra_unlabeled=extra)
    assert all(set(extra.ids) <= rows for rows in seen_rows)
    seen_rows.clear()
    run_cv(d, fast_hyper, regime="s", k=3, seed=0, extra_unlabeled=extra)
    assert all(not (set(extra.ids) & rows) for rows in seen_rows)


def test_cv_is_reproducible_across_thread_counts(synth, fast_hyper, monkeypatch):
    a = run_cv(synth.dataset, fast_hyper, regime="s", k=3, seed=5)
    monkeypatch.setattr(settings, "threads", 3)
    b = run_cv(synth.dataset, fast_hyper, regime="s", k=3, seed=5)
    assert [f.bacc for f in a.folds] == [f.bacc for f in b.folds]
    assert a.auc_mean == b.auc_mean or (np.isnan(a.auc_mean) and np.isnan(b.auc_mean))


def test_regime_table_has_one_row_per_regime(synth, fast_hyper):
    table = run_regime_experiment(synth.dataset, fast_hyper, k=3, seed=0)
    frame = table.to_frame()
    assert frame["regime"].tolist() == ["S", "SS", "TSS"]
    assert table.formatted().loc["TSS", "AUC"].count("±") == 1


def test_single_class_test_fold_leaves_auc_undefined(synth, fast_hyper, caplog):
    d = synth.dataset
    classes = np.zeros(d.n, dtype=np.int64)
    classes[:2] = 1  # two positives cannot reach four folds
    rare = MultiViewDataset(specs=d.specs, blocks=d.blocks, labels=LabelBlock.from_classes(classes, 2), ids=d.ids)
    res = run_cv(rare, fast_hyper, regime="s", k=4, seed=0)
    undefined = [f for f in res.folds if f.auc is None]
    assert len(undefined) >= 2
    assert all(0.0 <= f.bacc <= 1.0 for f in res.folds)
    assert "single class in the test fold" in caplog.text
    defined = [f.auc for f in res.folds if f.auc is not None]
    if defined:
        assert res.auc_mean == pytest.approx(np.mean(defined))
    else:
        assert np.isnan(res.auc_mean)


@pytest.mark.slow
def test_transduction_matches_or_beats_supervision_with_few_labels():
    # 40% of the labels kept; every regime runs the same folds on the same cohort
    h = Hyperparams(h_init=10, max_sweeps=400, conv_window=20, conv_tol=1e-7, prune_every=50, seed=0)
    s_auc, tss_auc = [], []
    for seed in range(10):
        spec = SyntheticSpec(n=200, dims=[10, 8], h_true=4, label_scale=3.0, label_missing=0.6, seed=seed)
        d = inject_missingness(generate_synthetic(spec).dataset, spec)
        assert 0.3 <= d.labels.label_mask.mean() <= 0.5
        table = run_regime_experiment(d, h, k=5, seed=seed)
        s_auc.append(table.results["s"].auc_mean)
        tss_auc.append(table.results["tss"].auc_mean)
    assert np.mean(tss_auc) >= np.mean(s_auc), (s_auc, tss_auc)
