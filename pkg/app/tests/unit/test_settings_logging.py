import json
import logging

import numpy as np
import pytest

from bionic.logging_setup import JsonFormatter, TextFormatter, get_logger
from bionic.settings import load_settings


def test_settings_from_environment(monkeypatch, tmp_path):
    monkeypatch.setenv("ENV_FILE", str(tmp_path / "absent.env"))
    monkeypatch.setenv("BIONIC_THREADS", "4")
    monkeypatch.setenv("BIONIC_PROGRESS_EVERY", "25")
    s = load_settings()
    assert s.threads == 4
    assert s.progress_every == 25
    assert s.jitter_start == 1e-10


def test_settings_from_env_file(monkeypatch, tmp_path):
    env = tmp_path / ".env.test"
    env.write_text("BIONIC_THREADS=3\n", encoding="utf-8")
    monkeypatch.setenv("ENV_FILE", str(env))
    monkeypatch.delenv("BIONIC_THREADS", raising=False)
    assert load_settings().threads == 3


def test_invalid_settings_name_the_variable(monkeypatch, tmp_path):
    monkeypatch.setenv("ENV_FILE", str(tmp_path / "absent.env"))
    monkeypatch.setenv("BIONIC_JITTER_START", "1e-3")
    monkeypatch.setenv("BIONIC_JITTER_MAX", "1e-6")
    with pytest.raises(RuntimeError, match="Invalid settings"):
        load_settings()


def _record(msg, **extra):
    rec = logging.LogRecord("bionic.test", logging.WARNING, __file__, 1, msg, None, None)
    for k, v in extra.items():
        setattr(rec, k, v)
    return rec


def test_json_formatter_promotes_model_context():
    rec = _record("sweep=10 elbo=-1.5 active_h=4", sweep=np.int64(10), fold=2, view="ct", elbo=-1.5, kept=np.array([3, 2]))
    line = JsonFormatter().format(rec)
    payload = json.loads(line)
    assert payload["message"] == "sweep=10 elbo=-1.5 active_h=4"
    assert payload["level"] == "WARNING"
    assert payload["sweep"] == 10 and payload["fold"] == 2 and payload["view"] == "ct"
    assert payload["elbo"] == -1.5
    assert payload["data"] == {"kept": [3, 2]}
    assert payload["ts"].endswith("Z")
    assert list(payload)[:7] == ["ts", "level", "logger", "fold", "view", "sweep", "elbo"]


def test_json_formatter_keeps_non_finite_bounds_parseable():
    payload = json.loads(JsonFormatter().format(_record("bound diverged", elbo=float("nan"), sweep=7)))
    assert payload["elbo"] == "nan"
    assert "data" not in payload


def test_text_formatter_prefixes_warnings():
    assert TextFormatter().format(_record("lower bound decreased")) == "WARNING: lower bound decreased"


def test_adapter_merges_call_extras(caplog):
    log = get_logger("bionic.test", component="inference", regime="ss")
    with caplog.at_level(logging.INFO, logger="bionic.test"):
        log.info("fit finished", extra={"regime": "tss", "sweeps": 12})
    rec = caplog.records[-1]
    assert rec.component == "inference"
    assert rec.regime == "tss"
    assert rec.sweeps == 12


def test_bound_adapter_narrows_context(caplog):
    base = get_logger("bionic.test", component="evaluation", regime="s")
    fold_log = base.bind(fold=3)
    with caplog.at_level(logging.INFO, logger="bionic.test"):
        fold_log.info("fold done", extra={"auc": 0.9})
    rec = caplog.records[-1]
    assert (rec.component, rec.regime, rec.fold, rec.auc) == ("evaluation", "s", 3, 0.9)
    assert "fold" not in base.extra
