from __future__ import annotations

"""
Closed-form Gaussian reconstructions of views from the generative posterior.

In preprocessed coordinates, for sample n and view m:

    mean_d = E[g_n] E[v_d]^T
    var_d  = E[v_d] Cov[g_n] E[v_d]^T + tr(Cov[v_d] E[g_n g_n^T]) + 1/E[psi_m]

Raw coordinates follow from x = mean + x~ B with B = diag(scale) rotation^T.
Raw variances add the training variance the rotation cut discarded and are
floored at VARIANCE_FLOOR, so every entry keeps a positive variance.
Cohort samples use their fitted q(g); other samples are embedded first.
"""

from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .dataset import LabelBlock, MultiViewDataset, ViewBlock
from .errors import DataValidationError
from .inference import embed_samples
from .logging_setup import get_logger
from .model import ModelState, PerSampleGaussian
from .preprocess import SCALE_FLOOR, apply_preprocess, invert_preprocess, raw_variance

VARIANCE_FLOOR = SCALE_FLOOR**2

log = get_logger(__name__, component="impute")


@dataclass
class Reconstruction:
    mean: np.ndarray  # preprocessed coordinates
    var: np.ndarray
    raw_mean: np.ndarray
    raw_var: np.ndarray


@dataclass
class ImputedDataset:
    dataset: MultiViewDataset
    variances: List[np.ndarray]  # per view, N x D_raw


def _check_view(s: ModelState, view: int) -> int:
    if not isinstance(view, (int, np.integer)) or not 0 <= int(view) < s.n_views:
        raise DataValidationError(f"view index {view!r} out of range [0, {s.n_views})")
    return int(view)


def reconstruct_moments(s: ModelState, qg: PerSampleGaussian, view: int) -> Reconstruction:
    """Reconstructions of one view for every sample of `qg` (rows of N x D)."""
    view = _check_view(s, view)
    qv = s.qv[view]
    noise_var = 1.0 / float(s.noise[view].mean)
    mean = qg.mean @ qv.mean.T
    latent = np.einsum("di,pij,dj->pd", qv.mean, qg.cov, qv.mean, optimize=True)[qg.pattern]
    loading = (
        np.einsum("ni,qij,nj->nq", qg.mean, qv.row_cov, qg.mean, optimize=True)
        + np.einsum("pij,qji->pq", qg.cov, qv.row_cov, optimize=True)[qg.pattern]
    )[:, qv.row_pattern]
    var = latent + loading + noise_var

    vp = s.preprocess.view(view)
    raw_mean = invert_preprocess(s.preprocess, view, mean) if mean.shape[0] else np.zeros((0, vp.raw_dim))
    a = (vp.rotation * vp.scale) @ qv.mean  # raw x latent
    raw_latent = np.einsum("ji,pik,jk->pj", a, qg.cov, a, optimize=True)[qg.pattern]
    raw_var = raw_latent + raw_variance(s.preprocess, view, loading + noise_var) + vp.dropped_variance()
    raw_var = np.maximum(raw_var, VARIANCE_FLOOR)
    return Reconstruction(mean=mean, var=var, raw_mean=np.atleast_2d(raw_mean), raw_var=raw_var)


def reconstruct_view(
    s: ModelState,
    sample: int,
    view: int,
    d: Optional[MultiViewDataset] = None,
) -> Reconstruction:
    """
    Reconstruction of one view for one sample, as vectors.

    Without `d` the sample indexes the fitted cohort; with `d` (raw
    coordinates) it indexes `d` and the sample is embedded from its observed
    views first.
    """
    view = _check_view(s, view)
    if d is None:
        qg = s.qg
    else:
        qg, _ = embed_samples(s, apply_preprocess(s.preprocess, d))
    if not 0 <= sample < qg.n:
        raise DataValidationError(f"sample index {sample} out of range [0, {qg.n})")
    r = reconstruct_moments(s, qg.take(np.array([sample])), view)
    return Reconstruction(mean=r.mean[0], var=r.var[0], raw_mean=r.raw_mean[0], raw_var=r.raw_var[0])


def impute_dataset(s: ModelState, d: MultiViewDataset) -> ImputedDataset:
    """
    Fill every unobserved entry of `d` with its reconstruction mean.

    Observed entries are copied verbatim and masks become all-true. The
    variance blocks hold the reconstruction variance of every entry (raw
    coordinates), observed entries included.
    """
    qg, _ = embed_samples(s, apply_preprocess(s.preprocess, d))
    blocks, variances = [], []
    filled_count = 0
    for m, block in enumerate(d.blocks):
        r = reconstruct_moments(s, qg, m)
        values = np.where(block.mask, block.values, r.raw_mean)
        filled_count += int((~block.mask).sum())
        blocks.append(ViewBlock(values=values, mask=np.ones_like(block.mask, dtype=bool)))
        variances.append(r.raw_var)
    labels = LabelBlock(onehot=d.labels.onehot, label_mask=d.labels.label_mask)
    out = MultiViewDataset(specs=d.specs, blocks=tuple(blocks), labels=labels, ids=d.ids)
    log.info("imputation done", extra={"n": d.n, "filled_entries": filled_count})
    return ImputedDataset(dataset=out, variances=variances)


__all__ = [
    "VARIANCE_FLOOR",
    "Reconstruction",
    "ImputedDataset",
    "reconstruct_moments",
    "reconstruct_view",
    "impute_dataset",
]
