from __future__ import annotations

"""
Experiment config schema (one JSON document per experiment).

This module is deliberately IO-light: it validates the document and resolves
relative paths against the config file's directory. The dataset module turns a
validated config into arrays.

    {
      "views": [{"name": "clinical", "path": "clinical.csv", "kind": "structured"},
                {"name": "ct", "path": "ct.bmv", "kind": "embedding"}],
      "labels": "labels.csv",
      "hyper": {"h_init": 100, "seed": 1},
      "regime": "ss",
      "unlabeled_views": [{"name": "clinical", "path": "extra_clinical.csv", "kind": "structured"}, ...]
    }
"""

import json
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, PositiveInt
from pydantic.functional_validators import field_validator, model_validator

from .io_utils import config_sha256
from .model import Hyperparams

ViewKind = Literal["structured", "embedding"]
RegimeTag = Literal["s", "ss", "tss"]


class ViewConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    name: str = Field(..., min_length=1)
    path: Path
    kind: ViewKind = "embedding"

    @property
    def is_binary(self) -> bool:
        return self.path.suffix.lower() in {".bmv", ".bin"}


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    views: List[ViewConfig] = Field(..., min_length=1)
    labels: Optional[Path] = None
    hyper: Hyperparams = Field(default_factory=Hyperparams)
    regime: RegimeTag = "s"
    unlabeled_views: List[ViewConfig] = Field(default_factory=list)
    # Labels for the extra rows are optional and never reach the fit; they only
    # let `predict` and `cv` report metrics on those rows.
    unlabeled_labels: Optional[Path] = None
    id_column: Optional[str] = "id"
    n_classes: Optional[PositiveInt] = None

    @field_validator("regime", mode="before")
    @classmethod
    def _lower_regime(cls, v: Any) -> Any:
        return v.lower() if isinstance(v, str) else v

    @field_validator("n_classes")
    @classmethod
    def _check_classes(cls, v: Optional[int]) -> Optional[int]:
        if v is not None and v < 2:
            raise ValueError("n_classes must be >= 2")
        return v

    @model_validator(mode="after")
    def _check_views(self) -> "ExperimentConfig":
        names = [v.name for v in self.views]
        if len(set(names)) != len(names):
            raise ValueError(f"view names must be unique, got {names}")
        if self.unlabeled_views:
            extra = [v.name for v in self.unlabeled_views]
            if extra != names:
                raise ValueError(f"unlabeled_views must list the same views in the same order: {extra} vs {names}")
            for a, b in zip(self.views, self.unlabeled_views):
                if a.kind != b.kind:
                    raise ValueError(f"view {a.name!r}: kind {a.kind!r} vs unlabeled {b.kind!r}")
        return self

    # --- Convenience ---

    def resolved(self, base: Path) -> "ExperimentConfig":
        """Copy with every relative path made absolute against `base`."""

        def fix(p: Optional[Path]) -> Optional[Path]:
            if p is None:
                return None
            return p if p.is_absolute() else (base / p)

        return self.model_copy(
            update={
                "views": [v.model_copy(update={"path": fix(v.path)}) for v in self.views],
                "labels": fix(self.labels),
                "unlabeled_views": [v.model_copy(update={"path": fix(v.path)}) for v in self.unlabeled_views],
                "unlabeled_labels": fix(self.unlabeled_labels),
            }
        )


def load_config(path: Path | str) -> Tuple[ExperimentConfig, str]:
    """
    Parse and validate a config file.

    Returns:
        (config with resolved paths, SHA-256 of the raw document)
    """
    path = Path(path)
    doc: Dict[str, Any] = json.loads(path.read_text(encoding="utf-8"))
    cfg = ExperimentConfig.model_validate(doc)
    return cfg.resolved(path.resolve().parent), config_sha256(doc)


__all__ = [
    "ViewKind",
    "RegimeTag",
    "ViewConfig",
    "ExperimentConfig",
    "load_config",
]
