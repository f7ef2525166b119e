from __future__ import annotations

"""
Predictive class probabilities from the two latent pathways.

For a sample embedded with loadings held fixed (inference.embed_samples):

    logit mean     mu_c = E[z] E[u_c]^T + E[g] E[v^(T)_c]^T
    logit variance v_c  = Var[z u_c^T] + Var[g v^(T)_c^T] + 1/E[psi_T]
    probability    p_c  = sigmoid(kappa(v_c) mu_c),  kappa(v) = (1 + pi v / 8)^-1/2

Binary tasks renormalize the two one-vs-rest outputs to sum to 1.
"""

from typing import Tuple

import numpy as np
from scipy.special import expit

from .dataset import MultiViewDataset
from .inference import embed_samples
from .model import ModelState, PerSampleGaussian, RowGaussianMatrix
from .preprocess import apply_preprocess


def _product_variance(qs: PerSampleGaussian, qr: RowGaussianMatrix) -> np.ndarray:
    """
    (N, C): Var[a_n b_c^T] for independent Gaussians a_n ~ qs, b_c ~ qr.

    = mu_a S_b mu_a^T + mu_b S_a mu_b^T + tr(S_a S_b)
    """
    rows_cov = qr.row_cov[qr.row_pattern]
    t1 = np.einsum("ni,cij,nj->nc", qs.mean, rows_cov, qs.mean, optimize=True)
    t2 = np.einsum("ci,pij,cj->pc", qr.mean, qs.cov, qr.mean, optimize=True)[qs.pattern]
    t3 = np.einsum("pij,cji->pc", qs.cov, rows_cov, optimize=True)[qs.pattern]
    return t1 + t2 + t3


def logit_moments(s: ModelState, qg: PerSampleGaussian, qz: PerSampleGaussian) -> Tuple[np.ndarray, np.ndarray]:
    mean = qz.mean @ s.qu.mean.T + qg.mean @ s.qvt.mean.T
    var = _product_variance(qz, s.qu) + _product_variance(qg, s.qvt) + 1.0 / float(s.psi_t.mean)
    return mean, var


def predict_logits(s: ModelState, d: MultiViewDataset) -> Tuple[np.ndarray, np.ndarray]:
    """(mean, variance), each N x C, for raw-coordinate samples in `d`."""
    qg, qz = embed_samples(s, apply_preprocess(s.preprocess, d))
    return logit_moments(s, qg, qz)


def discriminative_logits(s: ModelState, d: MultiViewDataset) -> np.ndarray:
    """E[z] E[U]^T only: the part of the logit that flows through the discriminative pathway."""
    _, qz = embed_samples(s, apply_preprocess(s.preprocess, d))
    return qz.mean @ s.qu.mean.T


def moderated_probability(mean: np.ndarray, var: np.ndarray) -> np.ndarray:
    kappa = 1.0 / np.sqrt(1.0 + np.pi * np.asarray(var, dtype=np.float64) / 8.0)
    return expit(kappa * np.asarray(mean, dtype=np.float64))


def proba_from_moments(mean: np.ndarray, var: np.ndarray) -> np.ndarray:
    p = moderated_probability(mean, var)
    if p.ndim == 2 and p.shape[1] == 2:
        p = p / p.sum(axis=1, keepdims=True)
    return p


def predict_proba(s: ModelState, d: MultiViewDataset) -> np.ndarray:
    return proba_from_moments(*predict_logits(s, d))


def labels_from_proba(p: np.ndarray) -> np.ndarray:
    # np.argmax returns the first maximum: ties go to the lower class index
    return np.argmax(p, axis=1).astype(np.int64)


def predict_labels(s: ModelState, d: MultiViewDataset) -> np.ndarray:
    return labels_from_proba(predict_proba(s, d))


__all__ = [
    "logit_moments",
    "predict_logits",
    "discriminative_logits",
    "moderated_probability",
    "proba_from_moments",
    "predict_proba",
    "labels_from_proba",
    "predict_labels",
]
