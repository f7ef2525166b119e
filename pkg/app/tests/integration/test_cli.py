import json

import numpy as np
import pandas as pd
import pytest

from bionic.io_utils import read_table_csv
from bionic.main import main

SMALL_HYPER = {"h_init": 5, "max_sweeps": 40, "conv_window": 10, "prune_every": 20, "seed": 2}


@pytest.fixture
def experiment(tmp_path, capsys):
    """Simulated dataset on disk plus an experiment config with a small model."""
    sim = tmp_path / "sim.json"
    sim.write_text(
        json.dumps({"n": 60, "dims": [5, 4], "h_true": 2, "view_missing": [0.2, 0.0], "seed": 9}), encoding="utf-8"
    )
    data_dir = tmp_path / "data"
    assert main(["simulate", "--config", str(sim), "--out", str(data_dir)]) == 0
    capsys.readouterr()
    generated = json.loads((data_dir / "config.json").read_text(encoding="utf-8"))
    generated["hyper"] = SMALL_HYPER
    cfg = data_dir / "exp.json"
    cfg.write_text(json.dumps(generated), encoding="utf-8")
    return cfg


def test_simulate_writes_dataset_truth_and_config(tmp_path, capsys):
    sim = tmp_path / "sim.json"
    sim.write_text(json.dumps({"n": 20, "dims": [3, 2], "seed": 1}), encoding="utf-8")
    out = tmp_path / "bin"
    assert main(["simulate", "--config", str(sim), "--out", str(out), "--binary", "--seed", "4"]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["report"]["n"] == 20
    assert (out / "view0.bmv").exists() and (out / "labels.csv").exists()
    truth = np.load(out / "truth.npz")
    assert truth["g"].shape == (20, 4)
    assert json.loads((out / "config.json").read_text(encoding="utf-8"))["hyper"] == {"seed": 4}


def test_fit_predict_impute_explain(experiment, tmp_path, capsys):
    model = tmp_path / "run" / "model.json"
    assert main(["fit", "--config", str(experiment), "--out", str(model), "--regime", "ss"]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["regime"] == "ss"
    assert 1 <= summary["sweeps"] <= SMALL_HYPER["max_sweeps"]

    pred = tmp_path / "run" / "pred.csv"
    assert main(["predict", "--model", str(model), "--config", str(experiment), "--out", str(pred)]) == 0
    first = pred.read_text(encoding="utf-8").splitlines()[0]
    assert first.startswith("# bionic config_sha256=") and "seed=2" in first
    table = read_table_csv(pred)
    assert list(table.columns) == ["id", "prob_0", "prob_1", "pred"]
    assert len(table) == 60
    np.testing.assert_allclose(table[["prob_0", "prob_1"]].sum(axis=1), 1.0)

    imputed = tmp_path / "run" / "imputed"
    assert main(["impute", "--model", str(model), "--config", str(experiment), "--out", str(imputed)]) == 0
    view0 = pd.read_csv(imputed / "view0.csv")
    assert not view0.isna().any().any()
    assert (imputed / "view0.var.csv").exists()

    explain = tmp_path / "run" / "explain"
    args = ["explain", "--model", str(model), "--config", str(experiment), "--out", str(explain), "--plot-data"]
    assert main(args) == 0
    sens = read_table_csv(explain / "view1.sensitivity.csv")
    assert list(sens.columns) == ["feature", "class_0", "class_1"]
    assert len(sens) == 4
    views = read_table_csv(explain / "views.csv")
    assert views["view"].tolist() == ["view0", "view1"]
    assert (explain / "relevance.csv").exists() and (explain / "view0.plot.csv").exists()

    tokens = tmp_path / "tokens.csv"
    pd.DataFrame(np.arange(12.0).reshape(3, 4), columns=["a", "b", "c", "d"]).to_csv(tokens, index=False)
    assert main(args + ["--tokens", f"view1={tokens}"]) == 0
    scored = read_table_csv(explain / "view1.tokens.csv")
    assert scored["token"].tolist() == [0, 1, 2]
    assert np.isfinite(scored["relevance"]).all()
    assert main(args + ["--tokens", f"nope={tokens}"]) == 1


def test_cv_and_validate(experiment, tmp_path, capsys):
    out = tmp_path / "cv.csv"
    assert main(["cv", "--config", str(experiment), "--folds", "3", "--regime", "s", "--out", str(out)]) == 0
    printed = capsys.readouterr().out
    assert "regime=s AUC" in printed
    frame = read_table_csv(out)
    assert frame["fold"].astype(str).tolist()[-2:] == ["mean", "sd"]
    preds = read_table_csv(tmp_path / "cv.predictions.csv")
    assert len(preds) == 60

    assert main(["validate", "--config", str(experiment)]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["n"] == 60
    assert report["views"][1]["view_missing_pct"] == 0.0


def test_usage_and_input_errors(tmp_path, capsys):
    assert main(["fit", "--config", "x.json"]) == 1
    assert "usage:" in capsys.readouterr().err
    assert main(["bogus"]) == 1
    assert main(["validate", "--config", str(tmp_path / "missing.json")]) == 1
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"views": []}), encoding="utf-8")
    assert main(["validate", "--config", str(bad)]) == 1
    assert main(["--help"]) == 0


def _write_extra_rows(experiment, rows=20):
    """Append unlabeled_views / unlabeled_labels (first `rows` samples, ids prefixed 'u') to the config."""
    data_dir = experiment.parent
    cfg = json.loads(experiment.read_text(encoding="utf-8"))
    extra_views = []
    for view in cfg["views"]:
        frame = pd.read_csv(data_dir / view["path"], dtype=str, keep_default_na=False).head(rows)
        frame["id"] = "u" + frame["id"]
        name = f"extra_{view['name']}.csv"
        frame.to_csv(data_dir / name, index=False)
        extra_views.append({**view, "path": name})
    labels = pd.read_csv(data_dir / cfg["labels"], dtype=str)
    labels = labels[labels["id"].isin(set(frame["id"].str[1:]))].copy()
    labels["id"] = "u" + labels["id"]
    cfg["unlabeled_views"] = extra_views
    cfg["unlabeled_labels"] = "extra_labels.csv"
    experiment.write_text(json.dumps(cfg), encoding="utf-8")
    return data_dir / "extra_labels.csv", labels


def _fit_and_predict_unlabeled(experiment, run_dir):
    model = run_dir / "model.json"
    assert main(["fit", "--config", str(experiment), "--out", str(model), "--regime", "tss"]) == 0
    pred = run_dir / "p.csv"
    assert main(["predict", "--model", str(model), "--config", str(experiment), "--out", str(pred), "--unlabeled"]) == 0
    return pred.read_bytes()


def test_transductive_predictions_do_not_depend_on_unlabeled_labels(experiment, tmp_path, capsys):
    label_file, labels = _write_extra_rows(experiment)
    assert len(labels) > 0

    labels.to_csv(label_file, index=False)
    original = _fit_and_predict_unlabeled(experiment, tmp_path / "a")
    rerun = _fit_and_predict_unlabeled(experiment, tmp_path / "b")

    flipped = labels.assign(label=(1 - labels["label"].astype(int)).astype(str))
    flipped.to_csv(label_file, index=False)
    swapped = _fit_and_predict_unlabeled(experiment, tmp_path / "c")

    assert original == rerun
    assert original == swapped
    assert original.decode("utf-8").startswith("# bionic config_sha256=")
    assert len(original.decode("utf-8").splitlines()) == 1 + 1 + 20
