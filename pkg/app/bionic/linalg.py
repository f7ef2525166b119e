"""SPD helpers for posterior covariance updates (Cholesky with jitter escalation)."""

from __future__ import annotations

from typing import Tuple

import numpy as np
from scipy import linalg

from .errors import NumericalError
from .settings import settings


def symmetrize(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + np.swapaxes(a, -1, -2))


def spd_inverse(precision: np.ndarray) -> Tuple[np.ndarray, float]:
    """
    Invert a symmetric positive-definite precision matrix.

    Returns (covariance, log-determinant of the covariance). On a failed
    factorization, jitter starting at BIONIC_JITTER_START is added to the
    diagonal and multiplied by 10 per retry up to BIONIC_JITTER_MAX.
    """
    p = symmetrize(np.asarray(precision, dtype=np.float64))
    if not np.isfinite(p).all():
        raise NumericalError("non-finite precision matrix")
    dim = p.shape[0]
    if dim == 0:
        return np.zeros((0, 0)), 0.0
    eye = np.eye(dim)
    jitter = 0.0
    while True:
        try:
            c, lower = linalg.cho_factor(p + jitter * eye, lower=True, check_finite=False)
            break
        except linalg.LinAlgError:
            jitter = settings.jitter_start if jitter == 0.0 else jitter * 10.0
            if jitter > settings.jitter_max * (1 + 1e-9):
                raise NumericalError(f"covariance solve failed after jitter escalation to {settings.jitter_max:g}")
    cov = linalg.cho_solve((c, lower), eye, check_finite=False)
    logdet_prec = 2.0 * np.log(np.diag(c)).sum()
    return symmetrize(cov), -float(logdet_prec)


def spd_inverse_batch(precisions: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """spd_inverse over a (P, L, L) stack."""
    covs = np.empty_like(precisions, dtype=np.float64)
    logdets = np.empty(precisions.shape[0])
    for i in range(precisions.shape[0]):
        covs[i], logdets[i] = spd_inverse(precisions[i])
    return covs, logdets


def logdet_batch(covs: np.ndarray) -> np.ndarray:
    """log|S| for a (P, L, L) stack of covariances; NumericalError if not PD."""
    if covs.shape[0] == 0 or covs.shape[-1] == 0:
        return np.zeros(covs.shape[0])
    sign, logdet = np.linalg.slogdet(covs)
    if np.any(sign <= 0):
        raise NumericalError("covariance is not positive definite")
    return logdet


def unique_rows(mask: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """(unique boolean rows, inverse index) with a stable, sorted pattern order."""
    if mask.shape[0] == 0:
        return np.zeros((0, mask.shape[1]), dtype=bool), np.zeros(0, dtype=np.int64)
    pats, inverse = np.unique(mask, axis=0, return_inverse=True)
    return pats.astype(bool), np.asarray(inverse, dtype=np.int64).reshape(-1)


__all__ = [
    "symmetrize",
    "spd_inverse",
    "spd_inverse_batch",
    "logdet_batch",
    "unique_rows",
]
