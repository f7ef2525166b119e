from __future__ import annotations

"""
Per-view input pipeline: center, rotate onto maximum-variance directions,
truncate at a cumulative variance threshold and scale each component to unit
standard deviation.

Forward map for one observed row x (raw units):

    x~ = scale^-1 * (rotation^T (x - mean))

Embedding views are rotated; structured views keep an identity rotation and
only get centered and scaled, entrywise. Embedding rows are treated as atomic:
a partially observed raw row is mean-filled before rotation and the rotated
row is flagged observed.

Public API
----------
fit_preprocess(d, variance_threshold=0.999) -> PreprocessState
apply_preprocess(p, d) -> MultiViewDataset (dims = kept components)
invert_preprocess(p, view, x_tilde) -> raw-space vector(s)
"""

from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np
from scipy import linalg

from .dataset import LabelBlock, MultiViewDataset, ViewBlock, ViewSpec
from .errors import DataValidationError, NumericalError
from .logging_setup import get_logger

SCALE_FLOOR = 1e-8
DEFAULT_VARIANCE_THRESHOLD = 0.999

log = get_logger(__name__, component="preprocess")


@dataclass(frozen=True, eq=False)
class ViewPreprocess:
    mean: np.ndarray
    rotation: np.ndarray
    scale: np.ndarray
    applies_rotation: bool
    eigenvalues: np.ndarray  # full spectrum, decreasing; empty for structured views
    dropped_var: np.ndarray = field(default_factory=lambda: np.empty(0))  # raw variance off the kept subspace

    @property
    def raw_dim(self) -> int:
        return int(self.mean.shape[0])

    @property
    def kept(self) -> int:
        return int(self.rotation.shape[1])

    @property
    def kept_variance_fraction(self) -> float:
        total = float(self.eigenvalues.sum()) if self.eigenvalues.size else 0.0
        if total <= 0.0:
            return 1.0
        return float(self.eigenvalues[: self.kept].sum() / total)

    def dropped_variance(self) -> np.ndarray:
        if self.dropped_var.size == 0:
            return np.zeros(self.raw_dim)
        return self.dropped_var

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Rows of raw, fully filled values -> rows of preprocessed values."""
        return ((np.atleast_2d(x) - self.mean) @ self.rotation) / self.scale

    def inverse(self, x_tilde: np.ndarray) -> np.ndarray:
        return self.mean + (np.atleast_2d(x_tilde) * self.scale) @ self.rotation.T


@dataclass(frozen=True, eq=False)
class PreprocessState:
    per_view: tuple
    specs: tuple  # raw view specs the state was fitted on

    def __post_init__(self) -> None:
        object.__setattr__(self, "per_view", tuple(self.per_view))
        object.__setattr__(self, "specs", tuple(self.specs))
        if len(self.per_view) != len(self.specs):
            raise DataValidationError("preprocess state does not align with its view specs")

    def view(self, i: int) -> ViewPreprocess:
        if not 0 <= i < len(self.per_view):
            raise DataValidationError(f"view index {i} out of range [0, {len(self.per_view)})")
        return self.per_view[i]


# ---------------------------
# Helpers
# ---------------------------


def _sign_fix(vectors: np.ndarray) -> np.ndarray:
    """Make each column's largest-magnitude entry positive."""
    if vectors.size == 0:
        return vectors
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def _kept_count(eigenvalues: np.ndarray, threshold: float) -> int:
    total = eigenvalues.sum()
    if total <= 0.0:
        return 1
    frac = np.cumsum(eigenvalues) / total
    # smallest count whose cumulative share reaches the threshold
    return int(min(np.searchsorted(frac, threshold - 1e-12) + 1, eigenvalues.size))


def _column_means(values: np.ndarray, mask: np.ndarray, name: str) -> np.ndarray:
    counts = mask.sum(axis=0)
    never = np.flatnonzero(counts == 0)
    if never.size:
        raise DataValidationError(f"view {name!r}: feature {int(never[0])} observed in zero training samples")
    return np.where(mask, values, 0.0).sum(axis=0) / counts


def _fit_structured(spec: ViewSpec, block: ViewBlock) -> ViewPreprocess:
    mean = _column_means(block.values, block.mask, spec.name)
    centered = np.where(block.mask, block.values - mean, 0.0)
    counts = block.mask.sum(axis=0)
    var = np.zeros(spec.dim)
    ok = counts >= 2
    var[ok] = (centered[:, ok] ** 2).sum(axis=0) / (counts[ok] - 1)
    if not ok.all():
        log.warning("single observation for some features; their scale is left at 1", extra={"view": spec.name})
    std = np.where(ok, np.sqrt(var), 1.0)
    return ViewPreprocess(
        mean=mean,
        rotation=np.eye(spec.dim),
        scale=np.maximum(std, SCALE_FLOOR),
        applies_rotation=False,
        eigenvalues=np.empty(0),
    )


def _fit_embedding(spec: ViewSpec, block: ViewBlock, threshold: float) -> ViewPreprocess:
    rows = block.row_observed
    values = block.values[rows]
    mask = block.mask[rows]
    if values.shape[0] < 2:
        raise DataValidationError(f"view {spec.name!r}: need >= 2 observed rows to fit the rotation")
    mean = _column_means(values, mask, spec.name)
    filled = np.where(mask, values, mean)
    cov = np.cov(filled, rowvar=False, ddof=1).reshape(spec.dim, spec.dim)
    if not np.isfinite(cov).all():
        raise NumericalError(f"view {spec.name!r}: non-finite covariance")
    evals, evecs = linalg.eigh(cov)
    order = np.argsort(evals)[::-1]
    evals = np.clip(evals[order], 0.0, None)
    evecs = _sign_fix(evecs[:, order])
    kept = _kept_count(evals, threshold)
    rotation = evecs[:, :kept]
    scores = (filled - mean) @ rotation
    std = scores.std(axis=0, ddof=1)
    dropped = np.clip(np.diag(cov) - (rotation**2) @ evals[:kept], 0.0, None)
    log.info(
        "rotation fitted",
        extra={"view": spec.name, "raw_dim": spec.dim, "kept": kept, "threshold": threshold},
    )
    return ViewPreprocess(
        mean=mean,
        rotation=rotation,
        scale=np.maximum(std, SCALE_FLOOR),
        applies_rotation=True,
        eigenvalues=evals,
        dropped_var=dropped,
    )


# ---------------------------
# Public API
# ---------------------------


def fit_preprocess(d: MultiViewDataset, variance_threshold: float = DEFAULT_VARIANCE_THRESHOLD) -> PreprocessState:
    """
    Fit centering (observed entries only), rotation and per-component scales on
    training rows. Rotation columns are covariance eigenvectors in decreasing
    eigenvalue order (1/(n-1) estimator over observed rows after mean fill),
    each with its largest-magnitude entry positive.
    """
    if not 0.0 < variance_threshold <= 1.0:
        raise DataValidationError(f"variance_threshold must be in (0, 1], got {variance_threshold}")
    per_view: List[ViewPreprocess] = []
    for spec, block in zip(d.specs, d.blocks):
        if spec.kind == "embedding":
            per_view.append(_fit_embedding(spec, block, variance_threshold))
        else:
            per_view.append(_fit_structured(spec, block))
    return PreprocessState(per_view=per_view, specs=d.specs)


def _check_specs(p: PreprocessState, specs: Sequence[ViewSpec]) -> None:
    if len(specs) != len(p.specs):
        raise DataValidationError(f"dataset has {len(specs)} views, preprocess state {len(p.specs)}")
    for got, want in zip(specs, p.specs):
        if (got.name, got.kind, got.dim) != (want.name, want.kind, want.dim):
            raise DataValidationError(
                f"view mismatch: got {got.name!r}/{got.kind}/{got.dim}, fitted {want.name!r}/{want.kind}/{want.dim}"
            )


def apply_preprocess(p: PreprocessState, d: MultiViewDataset) -> MultiViewDataset:
    """
    Map raw views into preprocessed coordinates. Embedding views get row-level
    masks; structured views keep their entrywise masks.
    """
    _check_specs(p, d.specs)
    specs: List[ViewSpec] = []
    blocks: List[ViewBlock] = []
    for spec, block, vp in zip(d.specs, d.blocks, p.per_view):
        if vp.applies_rotation:
            rows = block.row_observed
            filled = np.where(block.mask, block.values, vp.mean)
            out = np.full((d.n, vp.kept), np.nan)
            if rows.any():
                out[rows] = vp.forward(filled[rows])
            mask = np.repeat(rows[:, None], vp.kept, axis=1)
        else:
            out = (block.values - vp.mean) / vp.scale
            mask = block.mask
        specs.append(ViewSpec(name=spec.name, kind=spec.kind, dim=vp.kept))
        blocks.append(ViewBlock(values=out, mask=mask))
    labels = LabelBlock(onehot=d.labels.onehot, label_mask=d.labels.label_mask)
    return MultiViewDataset(specs=tuple(specs), blocks=tuple(blocks), labels=labels, ids=d.ids)


def invert_preprocess(p: PreprocessState, view: int, x_tilde: np.ndarray) -> np.ndarray:
    """
    mean + rotation (scale * x~). With truncation this is the minimum-norm
    reconstruction on the retained subspace. Accepts one vector or rows.
    """
    vp = p.view(view)
    x = np.asarray(x_tilde, dtype=np.float64)
    if x.shape[-1] != vp.kept:
        raise DataValidationError(f"view {view}: expected {vp.kept} preprocessed components, got {x.shape[-1]}")
    if not np.isfinite(x).all():
        raise DataValidationError("x~ must be finite")
    out = vp.inverse(x)
    return out[0] if x.ndim == 1 else out


def raw_variance(p: PreprocessState, view: int, var_tilde: np.ndarray) -> np.ndarray:
    """Raw-space marginal variances of independent preprocessed components."""
    vp = p.view(view)
    a2 = (vp.rotation * vp.scale) ** 2
    return np.atleast_2d(var_tilde) @ a2.T


__all__ = [
    "DEFAULT_VARIANCE_THRESHOLD",
    "SCALE_FLOOR",
    "ViewPreprocess",
    "PreprocessState",
    "fit_preprocess",
    "apply_preprocess",
    "invert_preprocess",
    "raw_variance",
]
