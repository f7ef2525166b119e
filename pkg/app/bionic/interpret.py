from __future__ import annotations

"""
Sensitivity of the discriminative logit to raw inputs, and relevance scores.

The discriminative logit of class c is linear in the preprocessed inputs, so
its gradient with respect to a raw view is constant:

    S^(m)_c = rotation diag(scale)^-1 E[W^(m)] E[u_c]^T     (length D_raw)

The generative shortcut g -> t is not part of S. A sample's relevance for a
view is the centered projection <x_raw - mean, S^(m)_c>; summed over the
observed views it equals the sample's discriminative logit.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from .classify import predict_logits
from .dataset import MultiViewDataset
from .errors import DataValidationError
from .logging_setup import get_logger
from .model import ModelState

SHARED_FACTOR_SHARE = 0.1  # a factor "loads on" a view above this share of its energy

log = get_logger(__name__, component="interpret")


@dataclass
class SensitivityMap:
    view_names: List[str]
    per_view: List[np.ndarray]  # D_raw x C per view
    per_sample: np.ndarray  # N x M for one class; NaN where the view is unobserved
    class_index: int
    ids: Tuple[str, ...] = field(default=())

    def view_frame(self, view: int, feature_names: Optional[List[str]] = None) -> pd.DataFrame:
        sens = self.per_view[view]
        names = feature_names or [f"f{j}" for j in range(sens.shape[0])]
        frame = pd.DataFrame(sens, columns=[f"class_{c}" for c in range(sens.shape[1])])
        frame.insert(0, "feature", names)
        return frame

    def sample_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.per_sample, columns=self.view_names)
        frame.insert(0, "id", list(self.ids) if self.ids else [str(i) for i in range(frame.shape[0])])
        return frame


def _check(s: ModelState, view: int, cls: int) -> None:
    if not 0 <= view < s.n_views:
        raise DataValidationError(f"view index {view} out of range [0, {s.n_views})")
    if not 0 <= cls < s.n_classes:
        raise DataValidationError(f"class index {cls} out of range [0, {s.n_classes})")


def global_sensitivity(s: ModelState, view: int, cls: int) -> np.ndarray:
    """Gradient of the expected class logit w.r.t. the raw view, discriminative pathway only."""
    _check(s, view, cls)
    vp = s.preprocess.view(view)
    direction = s.qw[view].mean @ s.qu.mean[cls]
    return vp.rotation @ (direction / vp.scale)


def sensitivity_matrix(s: ModelState, view: int) -> np.ndarray:
    """D_raw x C: every class at once."""
    return np.column_stack([global_sensitivity(s, view, c) for c in range(s.n_classes)])


def _centered_rows(s: ModelState, d: MultiViewDataset, view: int) -> np.ndarray:
    """Raw rows minus the training mean; unobserved entries sit at the mean (contribute 0)."""
    vp = s.preprocess.view(view)
    block = d.blocks[view]
    return np.where(block.mask, block.values, vp.mean) - vp.mean


def sample_relevance(s: ModelState, d: MultiViewDataset, sample: int, view: int, cls: int) -> Optional[float]:
    """<x_raw - mean, S>; None when the view is unobserved for the sample."""
    _check(s, view, cls)
    if not 0 <= sample < d.n:
        raise DataValidationError(f"sample index {sample} out of range [0, {d.n})")
    if not d.blocks[view].row_observed[sample]:
        return None
    x = _centered_rows(s, d, view)[sample]
    return float(x @ global_sensitivity(s, view, cls))


def relevance_matrix(s: ModelState, d: MultiViewDataset, cls: int) -> np.ndarray:
    """N x M relevances for one class; NaN marks an unobserved view."""
    out = np.full((d.n, s.n_views), np.nan)
    for m in range(s.n_views):
        _check(s, m, cls)
        r = _centered_rows(s, d, m) @ global_sensitivity(s, m, cls)
        rows = d.blocks[m].row_observed
        out[rows, m] = r[rows]
    return out


def sensitivity_map(s: ModelState, d: MultiViewDataset, cls: int) -> SensitivityMap:
    return SensitivityMap(
        view_names=s.view_names,
        per_view=[sensitivity_matrix(s, m) for m in range(s.n_views)],
        per_sample=relevance_matrix(s, d, cls),
        class_index=cls,
        ids=d.ids,
    )


def view_relevance(s: ModelState) -> pd.DataFrame:
    """
    Modality-level summary from the ARD structure.

    discriminative_share: view share of sum_k E||W^(m)_{:,k}||^2 E||U_{:,k}||^2
    active/shared/specific factors: generative factors holding at least
    SHARED_FACTOR_SHARE of their loading energy in the view, split into those
    shared with another view and those specific to it.
    """
    u_energy = s.qu.column_energy()
    disc = np.array([float(qw.column_energy() @ u_energy) for qw in s.qw])
    disc_share = disc / disc.sum() if disc.sum() > 0 else np.full(disc.shape, 1.0 / disc.size)

    energy = np.vstack([qv.column_energy() for qv in s.qv])  # M x H
    totals = energy.sum(axis=0)
    share = np.divide(energy, totals, out=np.zeros_like(energy), where=totals > 0)
    loads = share >= SHARED_FACTOR_SHARE
    shared = loads.sum(axis=0) >= 2
    rows: List[Dict[str, object]] = []
    for m, name in enumerate(s.view_names):
        rows.append(
            {
                "view": name,
                "discriminative_share": float(disc_share[m]),
                "active_factors": int(loads[m].sum()),
                "shared_factors": int((loads[m] & shared).sum()),
                "specific_factors": int((loads[m] & ~shared).sum()),
            }
        )
    return pd.DataFrame(rows)


def token_relevance(s: ModelState, view: int, tokens: np.ndarray, cls: int) -> np.ndarray:
    """Per-row relevance of a token/patch-level matrix living in the view's raw space."""
    _check(s, view, cls)
    vp = s.preprocess.view(view)
    t = np.atleast_2d(np.asarray(tokens, dtype=np.float64))
    if t.shape[1] != vp.raw_dim:
        raise DataValidationError(f"tokens have {t.shape[1]} columns, view {view} has {vp.raw_dim}")
    if not np.isfinite(t).all():
        raise DataValidationError("token matrix must be finite")
    return (t - vp.mean) @ global_sensitivity(s, view, cls)


def perturb_along_sensitivity(
    s: ModelState, x_raw: np.ndarray, view: int, cls: int, step: float
) -> Tuple[np.ndarray, np.ndarray]:
    """(baseline, baseline + step * unit sensitivity direction), both raw embeddings."""
    sens = global_sensitivity(s, view, cls)
    base = np.asarray(x_raw, dtype=np.float64).copy()
    if base.shape != sens.shape:
        raise DataValidationError(f"x has shape {base.shape}, view {view} expects {sens.shape}")
    norm = float(np.linalg.norm(sens))
    if norm == 0.0:
        log.warning("zero sensitivity direction; perturbation is the baseline", extra={"view": view, "class_index": cls})
        return base, base.copy()
    return base, base + step * sens / norm


def probability_sensitivity(s: ModelState, d: MultiViewDataset, sample: int, view: int, cls: int) -> np.ndarray:
    """
    Probability-level gradient: the logit sensitivity times the sample's
    sigmoid slope kappa p (1 - p) at its moderated logit.
    """
    mean, var = predict_logits(s, d)
    kappa = 1.0 / np.sqrt(1.0 + np.pi * var[sample, cls] / 8.0)
    p = 1.0 / (1.0 + np.exp(-kappa * mean[sample, cls]))
    return kappa * p * (1.0 - p) * global_sensitivity(s, view, cls)


__all__ = [
    "SensitivityMap",
    "global_sensitivity",
    "sensitivity_matrix",
    "sample_relevance",
    "relevance_matrix",
    "sensitivity_map",
    "view_relevance",
    "token_relevance",
    "perturb_along_sensitivity",
    "probability_sensitivity",
]
