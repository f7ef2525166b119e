from __future__ import annotations

"""
Model file persistence.

A fitted ModelState is stored as one JSON document:

    {
      "format_version": 1,
      "config_sha256": "...", "seed": 0, "regime": "ss",
      "hyper": {...}, "preprocess": {"specs": [...], "per_view": [...]},
      "n_classes": 2, "k": 1, "active_h": 7, "sample_ids": [...],
      "qg": {...}, "qv": [...], ..., "elbo_trace": [...]
    }

Arrays are nested lists. Python's float repr round-trips exactly, so
save -> load reproduces every array bit for bit.

API:
- state_to_doc(s, config_sha256=None) -> dict
- state_from_doc(doc) -> ModelState
- save_model(s, path, config_sha256=None) -> str
- load_model(path) -> ModelState
"""

import json
from pathlib import Path
from typing import Any, Dict, Optional

import numpy as np
from pydantic import ValidationError

from .dataset import ViewSpec
from .errors import DataValidationError
from .model import (
    ColumnGaussianMatrix,
    GammaPosterior,
    Hyperparams,
    ModelState,
    PerSampleGaussian,
    RowGaussianMatrix,
)
from .preprocess import PreprocessState, ViewPreprocess

FORMAT_VERSION = 1

__all__ = [
    "FORMAT_VERSION",
    "state_to_doc",
    "state_from_doc",
    "save_model",
    "load_model",
]


def _arr(a: np.ndarray) -> Dict[str, Any]:
    a = np.asarray(a, dtype=np.float64)
    return {"shape": list(a.shape), "data": a.reshape(-1).tolist()}


def _unarr(doc: Dict[str, Any]) -> np.ndarray:
    return np.asarray(doc["data"], dtype=np.float64).reshape(doc["shape"])


def _ints(a: np.ndarray) -> list:
    return np.asarray(a, dtype=np.int64).tolist()


def _gauss(q: PerSampleGaussian) -> Dict[str, Any]:
    return {"mean": _arr(q.mean), "cov": _arr(q.cov), "pattern": _ints(q.pattern)}


def _ungauss(doc: Dict[str, Any]) -> PerSampleGaussian:
    return PerSampleGaussian(_unarr(doc["mean"]), _unarr(doc["cov"]), np.asarray(doc["pattern"], dtype=np.int64))


def _rows(q: RowGaussianMatrix) -> Dict[str, Any]:
    return {"mean": _arr(q.mean), "row_cov": _arr(q.row_cov), "row_pattern": _ints(q.row_pattern)}


def _unrows(doc: Dict[str, Any]) -> RowGaussianMatrix:
    return RowGaussianMatrix(
        _unarr(doc["mean"]), _unarr(doc["row_cov"]), np.asarray(doc["row_pattern"], dtype=np.int64)
    )


def _gamma(g: GammaPosterior) -> Dict[str, Any]:
    return {"shape": _arr(g.shape), "rate": _arr(g.rate)}


def _ungamma(doc: Dict[str, Any]) -> GammaPosterior:
    return GammaPosterior(_unarr(doc["shape"]), _unarr(doc["rate"]))


def state_to_doc(s: ModelState, config_sha256: Optional[str] = None) -> Dict[str, Any]:
    p = s.preprocess
    return {
        "format_version": FORMAT_VERSION,
        "config_sha256": config_sha256 or s.meta.get("config_sha256"),
        "seed": s.hyper.seed,
        "regime": s.regime,
        "hyper": s.hyper.model_dump(),
        "preprocess": {
            "specs": [
                {"name": sp.name, "kind": sp.kind, "dim": sp.dim, "feature_names": list(sp.feature_names)}
                for sp in p.specs
            ],
            "per_view": [
                {
                    "mean": _arr(vp.mean),
                    "rotation": _arr(vp.rotation),
                    "scale": _arr(vp.scale),
                    "applies_rotation": vp.applies_rotation,
                    "eigenvalues": _arr(vp.eigenvalues),
                    "dropped_var": _arr(vp.dropped_var),
                }
                for vp in p.per_view
            ],
        },
        "n_classes": s.n_classes,
        "k": s.k,
        "active_h": s.active_h,
        "sample_ids": list(s.sample_ids),
        "qg": _gauss(s.qg),
        "qz": _gauss(s.qz),
        "qt": _gauss(s.qt),
        "qv": [_rows(q) for q in s.qv],
        "qw": [{"mean": _arr(q.mean), "col_cov": _arr(q.col_cov)} for q in s.qw],
        "qu": _rows(s.qu),
        "qvt": _rows(s.qvt),
        "ard_v": [_gamma(g) for g in s.ard_v],
        "ard_w": [_gamma(g) for g in s.ard_w],
        "noise": [_gamma(g) for g in s.noise],
        "tau": _gamma(s.tau),
        "psi_t": _gamma(s.psi_t),
        "xi": _arr(s.xi),
        "elbo_trace": [float(v) for v in s.elbo_trace],
        "prune_sweeps": [int(v) for v in s.prune_sweeps],
    }


def state_from_doc(doc: Dict[str, Any]) -> ModelState:
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise DataValidationError(f"unsupported model format_version {version!r}, expected {FORMAT_VERSION}")
    try:
        hyper = Hyperparams.model_validate(doc["hyper"])
        pre = doc["preprocess"]
        specs = tuple(
            ViewSpec(name=sp["name"], kind=sp["kind"], dim=int(sp["dim"]), feature_names=tuple(sp["feature_names"]))
            for sp in pre["specs"]
        )
        per_view = tuple(
            ViewPreprocess(
                mean=_unarr(vp["mean"]),
                rotation=_unarr(vp["rotation"]),
                scale=_unarr(vp["scale"]),
                applies_rotation=bool(vp["applies_rotation"]),
                eigenvalues=_unarr(vp["eigenvalues"]),
                dropped_var=_unarr(vp.get("dropped_var", {"data": [], "shape": [0]})),
            )
            for vp in pre["per_view"]
        )
        return ModelState(
            hyper=hyper,
            preprocess=PreprocessState(per_view=per_view, specs=specs),
            n_classes=int(doc["n_classes"]),
            k=int(doc["k"]),
            qg=_ungauss(doc["qg"]),
            qz=_ungauss(doc["qz"]),
            qt=_ungauss(doc["qt"]),
            qv=[_unrows(q) for q in doc["qv"]],
            qw=[ColumnGaussianMatrix(_unarr(q["mean"]), _unarr(q["col_cov"])) for q in doc["qw"]],
            qu=_unrows(doc["qu"]),
            qvt=_unrows(doc["qvt"]),
            ard_v=[_ungamma(g) for g in doc["ard_v"]],
            ard_w=[_ungamma(g) for g in doc["ard_w"]],
            noise=[_ungamma(g) for g in doc["noise"]],
            tau=_ungamma(doc["tau"]),
            psi_t=_ungamma(doc["psi_t"]),
            xi=_unarr(doc["xi"]),
            elbo_trace=[float(v) for v in doc["elbo_trace"]],
            active_h=int(doc["active_h"]),
            prune_sweeps=[int(v) for v in doc["prune_sweeps"]],
            sample_ids=tuple(doc["sample_ids"]),
            regime=str(doc["regime"]),
            meta={"config_sha256": doc.get("config_sha256")},
        )
    except (KeyError, TypeError, ValueError, ValidationError) as e:
        raise DataValidationError(f"malformed model document: {e}") from e


def save_model(s: ModelState, path: Path | str, config_sha256: Optional[str] = None) -> str:
    """Write the model document; returns the path written."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = json.dumps(state_to_doc(s, config_sha256), ensure_ascii=False, separators=(",", ":"))
    path.write_text(payload, encoding="utf-8")
    return str(path)


def load_model(path: Path | str) -> ModelState:
    path = Path(path)
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError as e:
        raise DataValidationError(f"model file not found: {path}") from e
    except json.JSONDecodeError as e:
        raise DataValidationError(f"model file is not valid JSON: {path}") from e
    return state_from_doc(doc)
