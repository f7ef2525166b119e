import json

import numpy as np
import pandas as pd
import pytest
from pydantic import ValidationError

from bionic.errors import DataValidationError
from bionic.io_utils import (
    config_sha256,
    provenance_line,
    read_matrix_bin,
    read_table_csv,
    read_view_csv,
    write_matrix_bin,
    write_table_csv,
    write_view_csv,
)
from bionic.schema import ExperimentConfig, load_config


def test_config_paths_resolve_against_the_file(tmp_path):
    doc = {
        "views": [{"name": "clinical", "path": "clinical.csv", "kind": "structured"}, {"name": "ct", "path": "ct.bmv"}],
        "labels": "labels.csv",
        "hyper": {"h_init": 20, "seed": 4},
        "regime": "TSS",
    }
    path = tmp_path / "exp.json"
    path.write_text(json.dumps(doc), encoding="utf-8")
    cfg, sha = load_config(path)
    assert cfg.views[0].path == tmp_path.resolve() / "clinical.csv"
    assert cfg.views[1].kind == "embedding" and cfg.views[1].is_binary
    assert cfg.regime == "tss"
    assert cfg.hyper.h_init == 20
    assert sha == config_sha256(doc)


@pytest.mark.parametrize(
    "doc",
    [
        {"views": []},
        {"views": [{"name": "a", "path": "a.csv"}, {"name": "a", "path": "b.csv"}]},
        {"views": [{"name": "a", "path": "a.csv"}], "regime": "semi"},
        {"views": [{"name": "a", "path": "a.csv"}], "unlabeled_views": [{"name": "b", "path": "b.csv"}]},
        {"views": [{"name": "a", "path": "a.csv"}], "n_classes": 1},
        {"views": [{"name": "a", "path": "a.csv"}], "surprise": True},
    ],
)
def test_invalid_configs(doc):
    with pytest.raises(ValidationError):
        ExperimentConfig.model_validate(doc)


def test_config_hash_ignores_key_order():
    assert config_sha256({"a": 1, "b": [1, 2]}) == config_sha256({"b": [1, 2], "a": 1})


def test_binary_matrix_keeps_nan(tmp_path):
    x = np.array([[1.5, np.nan], [-2.0, 3.25]])
    write_matrix_bin(tmp_path / "m.bmv", x)
    np.testing.assert_array_equal(read_matrix_bin(tmp_path / "m.bmv"), x)


def test_binary_matrix_bad_magic(tmp_path):
    (tmp_path / "bad.bmv").write_bytes(b"XXXX" + bytes(16))
    with pytest.raises(DataValidationError, match="bad magic"):
        read_matrix_bin(tmp_path / "bad.bmv")


def test_tables_carry_a_provenance_line(tmp_path):
    meta = {"seed": 3, "config_sha256": "ff00", "regime": "ss"}
    path = write_table_csv(tmp_path / "t.csv", pd.DataFrame({"id": ["a"], "prob_0": [0.25]}), meta)
    first = open(path, encoding="utf-8").readline().strip()
    assert first == provenance_line(meta) == "# bionic config_sha256=ff00 regime=ss seed=3"
    assert read_table_csv(path)["prob_0"].tolist() == [0.25]


def test_view_csv_reads_back_every_bit(tmp_path):
    rng = np.random.default_rng(8)
    values = rng.normal(scale=300.0, size=(40, 6))
    values[0, 0] = -413.06354339189346
    values[3, 4] = np.nan
    path = tmp_path / "view.csv"
    write_view_csv(path, values, [f"f{j}" for j in range(6)], ids=[f"s{i}" for i in range(40)])
    ids, names, back = read_view_csv(path)
    assert ids[0] == "s0" and names == [f"f{j}" for j in range(6)]
    np.testing.assert_array_equal(back.view(np.uint64)[~np.isnan(values)], values.view(np.uint64)[~np.isnan(values)])
    assert np.isnan(back[3, 4])


def test_view_csv_names_the_first_bad_cell(tmp_path):
    path = tmp_path / "view.csv"
    path.write_text("id,a,b\nx,1.5,\ny,2.0,oops\n", encoding="utf-8")
    with pytest.raises(DataValidationError, match="row 1 column 'b'"):
        read_view_csv(path)
