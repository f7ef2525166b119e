from __future__ import annotations

"""
Multi-view datasets with structured missingness.

A dataset is N samples x M views. Each view is a dense float matrix plus a
boolean observation mask (True = observed); missing entries hold NaN and are
never read by inference, the mask is the single source of truth. View-level
missingness for sample n means row n of that view's mask is all False. Labels
are stored one-hot with a label mask (False = unlabeled, row all-zero).

Public API
----------
load_dataset(views, labels=None, id_column="id", n_classes=None, id_prefix="") -> MultiViewDataset
validate_dataset(d) -> ValidationReport
subset(d, rows) -> MultiViewDataset
concat(a, b) -> MultiViewDataset
with_labels_masked(d) -> MultiViewDataset
save_dataset(d, directory, binary=False) -> dict (config fragment)

Datasets are immutable after construction (arrays are read-only) and can be
shared across threads.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Any, Dict, List, Literal, Optional, Sequence

import numpy as np

from .errors import DataValidationError
from .io_utils import (
    read_labels_csv,
    read_matrix_bin,
    read_view_csv,
    write_labels_csv,
    write_matrix_bin,
    write_view_csv,
)
from .logging_setup import get_logger

if TYPE_CHECKING:
    from .schema import ViewConfig

ViewKindT = Literal["structured", "embedding"]

log = get_logger(__name__, component="dataset")


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.flags.writeable = False
    return a


# ---------------------------
# Domain types
# ---------------------------


@dataclass(frozen=True)
class ViewSpec:
    name: str
    kind: ViewKindT
    dim: int
    feature_names: tuple = field(default=(), compare=False)

    def __post_init__(self) -> None:
        if self.kind not in ("structured", "embedding"):
            raise DataValidationError(f"view {self.name!r}: unknown kind {self.kind!r}")
        if self.dim < 1:
            raise DataValidationError(f"view {self.name!r}: dim must be >= 1, got {self.dim}")
        if self.feature_names and len(self.feature_names) != self.dim:
            raise DataValidationError(f"view {self.name!r}: {len(self.feature_names)} feature names for dim {self.dim}")

    def names(self) -> List[str]:
        return list(self.feature_names) if self.feature_names else [f"f{j}" for j in range(self.dim)]


@dataclass(frozen=True, eq=False)
class ViewBlock:
    values: np.ndarray
    mask: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        mask = np.asarray(self.mask, dtype=bool)
        if values.ndim != 2 or values.shape != mask.shape:
            raise DataValidationError(f"values {values.shape} and mask {mask.shape} must be equal 2-D shapes")
        if not np.isfinite(values[mask]).all():
            raise DataValidationError("non-finite value at an observed position")
        values = np.where(mask, values, np.nan)
        object.__setattr__(self, "values", _frozen(values))
        object.__setattr__(self, "mask", _frozen(mask))

    @property
    def row_observed(self) -> np.ndarray:
        return self.mask.any(axis=1)

    def filled(self, fill: float = 0.0) -> np.ndarray:
        """Writable copy with unobserved entries set to `fill`."""
        return np.where(self.mask, self.values, fill)


@dataclass(frozen=True, eq=False)
class LabelBlock:
    onehot: np.ndarray
    label_mask: np.ndarray

    def __post_init__(self) -> None:
        onehot = np.asarray(self.onehot, dtype=np.float64)
        lm = np.asarray(self.label_mask, dtype=bool)
        if onehot.ndim != 2 or onehot.shape[0] != lm.shape[0]:
            raise DataValidationError(f"onehot {onehot.shape} does not align with label_mask {lm.shape}")
        if onehot.shape[1] < 2:
            raise DataValidationError(f"need C >= 2 classes, got {onehot.shape[1]}")
        if lm.any():
            rows = onehot[lm]
            if not (np.isin(rows, (0.0, 1.0)).all() and np.all(rows.sum(axis=1) == 1.0)):
                raise DataValidationError("labeled rows must be one-hot")
        onehot = np.where(lm[:, None], onehot, 0.0)
        object.__setattr__(self, "onehot", _frozen(onehot))
        object.__setattr__(self, "label_mask", _frozen(lm))

    @property
    def n_classes(self) -> int:
        return int(self.onehot.shape[1])

    @property
    def classes(self) -> np.ndarray:
        """Class index per sample; -1 where unlabeled."""
        out = np.full(self.onehot.shape[0], -1, dtype=np.int64)
        out[self.label_mask] = np.argmax(self.onehot[self.label_mask], axis=1)
        return out

    @classmethod
    def from_classes(cls, classes: Sequence[int], n_classes: int) -> "LabelBlock":
        """Build from class indices, -1 meaning unlabeled."""
        y = np.asarray(classes, dtype=np.int64)
        lm = y >= 0
        if np.any(y >= n_classes) or np.any(y < -1):
            raise DataValidationError(f"label outside {{0..{n_classes - 1}}}")
        onehot = np.zeros((y.shape[0], n_classes))
        onehot[np.flatnonzero(lm), y[lm]] = 1.0
        return cls(onehot=onehot, label_mask=lm)


@dataclass(frozen=True, eq=False)
class MultiViewDataset:
    specs: tuple
    blocks: tuple
    labels: LabelBlock
    ids: tuple = field(default=())

    def __post_init__(self) -> None:
        specs = tuple(self.specs)
        blocks = tuple(self.blocks)
        if not specs:
            raise DataValidationError("a dataset needs at least one view")
        if len(specs) != len(blocks):
            raise DataValidationError(f"{len(specs)} specs for {len(blocks)} blocks")
        names = [s.name for s in specs]
        if len(set(names)) != len(names):
            raise DataValidationError(f"view names must be unique: {names}")
        n = blocks[0].values.shape[0]
        for s, b in zip(specs, blocks):
            if b.values.shape[0] != n:
                raise DataValidationError(
                    f"row-count mismatch: view {s.name!r} has {b.values.shape[0]} rows, expected {n}"
                )
            if b.values.shape[1] != s.dim:
                raise DataValidationError(f"view {s.name!r}: {b.values.shape[1]} columns for dim {s.dim}")
        if self.labels.onehot.shape[0] != n:
            raise DataValidationError(f"labels have {self.labels.onehot.shape[0]} rows, views have {n}")
        ids = tuple(str(i) for i in self.ids) if self.ids else tuple(str(i) for i in range(n))
        if len(ids) != n:
            raise DataValidationError(f"{len(ids)} sample ids for {n} rows")
        if len(set(ids)) != n:
            raise DataValidationError("duplicate sample identifiers")
        object.__setattr__(self, "specs", specs)
        object.__setattr__(self, "blocks", blocks)
        object.__setattr__(self, "ids", ids)

    @property
    def n(self) -> int:
        return len(self.ids)

    @property
    def n_views(self) -> int:
        return len(self.specs)

    @property
    def n_classes(self) -> int:
        return self.labels.n_classes

    def view_observed(self) -> np.ndarray:
        """N x M boolean, True where the sample has >= 1 observed entry in the view."""
        if self.n == 0:
            return np.zeros((0, self.n_views), dtype=bool)
        return np.column_stack([b.row_observed for b in self.blocks])

    def index_of(self, view: int | str) -> int:
        if isinstance(view, str):
            for i, s in enumerate(self.specs):
                if s.name == view:
                    return i
            raise DataValidationError(f"unknown view {view!r}")
        if not 0 <= view < self.n_views:
            raise DataValidationError(f"view index {view} out of range [0, {self.n_views})")
        return int(view)

    def equals(self, other: "MultiViewDataset") -> bool:
        """Bitwise equality of specs, ids, values (NaN-aware), masks and labels."""
        if self.specs != other.specs or self.ids != other.ids:
            return False
        for a, b in zip(self.blocks, other.blocks):
            if not (np.array_equal(a.mask, b.mask) and np.array_equal(a.values, b.values, equal_nan=True)):
                return False
        return np.array_equal(self.labels.onehot, other.labels.onehot) and np.array_equal(
            self.labels.label_mask, other.labels.label_mask
        )


@dataclass
class ViewReport:
    name: str
    kind: str
    dim: int
    feature_missing_pct: float
    view_missing_pct: float


@dataclass
class ValidationReport:
    n: int
    n_classes: int
    views: List[ViewReport]
    label_coverage_pct: float
    class_counts: List[int]
    warnings: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n": self.n,
            "n_classes": self.n_classes,
            "label_coverage_pct": self.label_coverage_pct,
            "class_counts": self.class_counts,
            "views": [vars(v) for v in self.views],
            "warnings": list(self.warnings),
        }


# ---------------------------
# Operations
# ---------------------------


def _pct(part: int, whole: int) -> float:
    return 0.0 if whole == 0 else 100.0 * part / whole


def validate_dataset(d: MultiViewDataset) -> ValidationReport:
    """
    Report missingness per view and label coverage.

    Feature-level missingness is the share of missing entries among rows where
    the view is present; view-level missingness is the share of rows where it
    is absent. Warnings never raise; a sample without any observed view does.
    """
    obs = d.view_observed()
    empty = np.flatnonzero(~obs.any(axis=1)) if d.n else np.array([], dtype=int)
    if empty.size:
        raise DataValidationError(
            f"{empty.size} sample(s) have no observed view, first id {d.ids[int(empty[0])]!r}"
        )

    views: List[ViewReport] = []
    warnings: List[str] = []
    for j, (spec, block) in enumerate(zip(d.specs, d.blocks)):
        present = obs[:, j]
        n_present = int(present.sum())
        missing_entries = int((~block.mask[present]).sum())
        views.append(
            ViewReport(
                name=spec.name,
                kind=spec.kind,
                dim=spec.dim,
                feature_missing_pct=_pct(missing_entries, n_present * spec.dim),
                view_missing_pct=_pct(d.n - n_present, d.n),
            )
        )
        never = np.flatnonzero(~block.mask.any(axis=0)) if d.n else np.array([], dtype=int)
        if never.size:
            warnings.append(f"view {spec.name!r}: {never.size} feature(s) never observed")

    counts = d.labels.onehot[d.labels.label_mask].sum(axis=0).astype(int).tolist()
    coverage = _pct(int(d.labels.label_mask.sum()), d.n)
    if d.n and coverage == 0.0:
        warnings.append("no labeled samples")
    for c, k in enumerate(counts):
        if d.labels.label_mask.any() and k == 0:
            warnings.append(f"class {c} has no labeled samples")

    report = ValidationReport(
        n=d.n,
        n_classes=d.n_classes,
        views=views,
        label_coverage_pct=coverage,
        class_counts=counts,
        warnings=warnings,
    )
    for w in warnings:
        log.warning(w)
    return report


def subset(d: MultiViewDataset, rows: Sequence[int]) -> MultiViewDataset:
    """Row-restricted copy preserving masks, labels and ids; `d` is untouched."""
    idx = np.asarray(rows, dtype=np.int64).reshape(-1)
    if idx.size and (idx.min() < 0 or idx.max() >= d.n):
        raise DataValidationError(f"row index out of range [0, {d.n})")
    if np.unique(idx).size != idx.size:
        raise DataValidationError("row indices must be duplicate-free")
    blocks = tuple(ViewBlock(values=b.values[idx], mask=b.mask[idx]) for b in d.blocks)
    labels = LabelBlock(onehot=d.labels.onehot[idx], label_mask=d.labels.label_mask[idx])
    return MultiViewDataset(specs=d.specs, blocks=blocks, labels=labels, ids=tuple(d.ids[i] for i in idx))


def concat(a: MultiViewDataset, b: MultiViewDataset) -> MultiViewDataset:
    """Rows of `b` appended after the rows of `a` (same views, same class count)."""
    if a.specs != b.specs:
        raise DataValidationError("cannot concatenate datasets with different view specs")
    if a.n_classes != b.n_classes:
        raise DataValidationError(f"class count mismatch: {a.n_classes} vs {b.n_classes}")
    blocks = tuple(
        ViewBlock(values=np.vstack([x.values, y.values]), mask=np.vstack([x.mask, y.mask]))
        for x, y in zip(a.blocks, b.blocks)
    )
    labels = LabelBlock(
        onehot=np.vstack([a.labels.onehot, b.labels.onehot]),
        label_mask=np.concatenate([a.labels.label_mask, b.labels.label_mask]),
    )
    return MultiViewDataset(specs=a.specs, blocks=blocks, labels=labels, ids=a.ids + b.ids)


def with_labels_masked(d: MultiViewDataset) -> MultiViewDataset:
    """Same inputs, every label removed (label_mask all False, onehot zeroed)."""
    labels = LabelBlock(onehot=np.zeros_like(d.labels.onehot), label_mask=np.zeros(d.n, dtype=bool))
    return MultiViewDataset(specs=d.specs, blocks=d.blocks, labels=labels, ids=d.ids)


def _read_view(cfg: "ViewConfig", id_column: Optional[str]):
    if cfg.is_binary:
        values = read_matrix_bin(cfg.path)
        names = [f"f{j}" for j in range(values.shape[1])]
        return None, names, values
    return read_view_csv(cfg.path, id_column=id_column)


def load_dataset(
    views: Sequence["ViewConfig"],
    labels: Optional[Path | str] = None,
    id_column: Optional[str] = "id",
    n_classes: Optional[int] = None,
    id_prefix: str = "",
) -> MultiViewDataset:
    """
    Load one file per view plus an optional label CSV, then validate.

    Samples align by row order; when a view file has an id column its ids must
    match the other views' ids in the same order. Label rows reference sample
    ids (row indices as strings when no view carries ids); samples absent from
    the label file are unlabeled. `id_prefix` is applied to row-index ids only.
    """
    specs: List[ViewSpec] = []
    blocks: List[ViewBlock] = []
    ids: Optional[List[str]] = None
    n: Optional[int] = None
    for vc in views:
        vids, names, values = _read_view(vc, id_column)
        if n is not None and values.shape[0] != n:
            raise DataValidationError(
                f"row-count mismatch: view {vc.name!r} has {values.shape[0]} rows, expected {n}"
            )
        n = values.shape[0]
        if vids is not None:
            if len(set(vids)) != len(vids):
                raise DataValidationError(f"duplicate sample identifiers in view {vc.name!r}")
            if ids is not None and vids != ids:
                raise DataValidationError(f"sample ids of view {vc.name!r} disagree with earlier views")
            ids = vids
        mask = np.isfinite(values)
        specs.append(ViewSpec(name=vc.name, kind=vc.kind, dim=values.shape[1], feature_names=tuple(names)))
        blocks.append(ViewBlock(values=values, mask=mask))

    assert n is not None
    if ids is None:
        ids = [f"{id_prefix}{i}" for i in range(n)]

    classes = np.full(n, -1, dtype=np.int64)
    if labels is not None:
        lids, lab = read_labels_csv(labels)
        if len(set(lids)) != len(lids):
            raise DataValidationError("duplicate sample identifiers in label file")
        pos = {sid: i for i, sid in enumerate(ids)}
        unknown = [sid for sid in lids if sid not in pos]
        if unknown:
            raise DataValidationError(f"label file references unknown sample id {unknown[0]!r}")
        for sid, y in zip(lids, lab):
            classes[pos[sid]] = y
    n_cls = n_classes if n_classes is not None else max(2, int(classes.max()) + 1 if n else 2)
    if np.any(classes < -1) or np.any(classes >= n_cls):
        raise DataValidationError(f"label outside {{0..{n_cls - 1}}}")

    d = MultiViewDataset(
        specs=tuple(specs),
        blocks=tuple(blocks),
        labels=LabelBlock.from_classes(classes, n_cls),
        ids=tuple(ids),
    )
    validate_dataset(d)
    log.info(
        "dataset loaded",
        extra={"n": d.n, "views": [s.name for s in d.specs], "labeled": int(d.labels.label_mask.sum())},
    )
    return d


def save_dataset(d: MultiViewDataset, directory: Path | str, binary: bool = False, stem: str = "") -> Dict[str, Any]:
    """
    Write one file per view plus `labels.csv`; return the matching config
    fragment (`views`, `labels`, `n_classes`) with paths relative to `directory`.

    CSV floats are written with round-trip precision, so load(save(d)) equals d
    bitwise. Binary views carry no ids; CSV views carry an `id` column.
    """
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    views: List[Dict[str, Any]] = []
    for spec, block in zip(d.specs, d.blocks):
        if binary:
            name = f"{stem}{spec.name}.bmv"
            write_matrix_bin(out / name, block.values)
        else:
            name = f"{stem}{spec.name}.csv"
            write_view_csv(out / name, block.values, spec.names(), ids=list(d.ids))
        views.append({"name": spec.name, "path": name, "kind": spec.kind})
    lab_name = f"{stem}labels.csv"
    lm = d.labels.label_mask
    # binary views carry no ids, so their labels reference row indices
    label_ids = [str(i) for i in range(d.n)] if binary else list(d.ids)
    write_labels_csv(out / lab_name, [sid for sid, m in zip(label_ids, lm) if m], d.labels.classes[lm])
    return {"views": views, "labels": lab_name, "n_classes": d.n_classes}


__all__ = [
    "ViewSpec",
    "ViewBlock",
    "LabelBlock",
    "MultiViewDataset",
    "ViewReport",
    "ValidationReport",
    "load_dataset",
    "validate_dataset",
    "subset",
    "concat",
    "with_labels_masked",
    "save_dataset",
]
