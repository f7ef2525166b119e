from __future__ import annotations

"""
Hyperparameters, variational posterior containers and deterministic
initialization of the generative-discriminative latent model.

Model (row-vector convention, preprocessed coordinates):

    g_n ~ N(0, I_H)
    x_n^(m) | g_n ~ N(g_n V^(m)T, psi_m^-1 I)           observed entries only
    z_n ~ N(sum_{m observed} x_n^(m) W^(m), tau^-1 I_K)
    t_n = z_n U^T + g_n V^(T)T + eps_t,  eps_t ~ N(0, psi_T^-1 I_C)
    y_nc ~ Bernoulli(sigmoid(t_nc))                     labeled samples only

ARD: one Gamma precision per column of V^(m) and of W^(m). U and V^(T) carry
standard normal priors. All precisions start from broad Gamma(1e-14, 1e-14).

Mean-field factorization:
    q = prod_n q(g_n) q(z_n) q(t_n) * prod_m q(V^(m)) q(W^(m)) q(alpha_V^(m)) q(alpha_W^(m)) q(psi_m)
        * q(U) q(V^(T)) q(tau) q(psi_T)
"""

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, NonNegativeInt, PositiveFloat, PositiveInt
from pydantic.functional_validators import field_validator, model_validator
from scipy.special import digamma, gammaln

from .dataset import MultiViewDataset
from .errors import DataValidationError
from .logging_setup import get_logger
from .preprocess import DEFAULT_VARIANCE_THRESHOLD, PreprocessState

LOADING_INIT_STD = 0.1  # N(0, 1e-2)

log = get_logger(__name__, component="model")


# ---------------------------
# Hyperparameters
# ---------------------------


class Hyperparams(BaseModel):
    """Latent sizes, prior shapes, convergence and pruning controls, seed."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    h_init: PositiveInt = 100
    k: Optional[PositiveInt] = None  # None -> C - 1
    a0: PositiveFloat = 1e-14
    b0: PositiveFloat = 1e-14
    noise_shape: PositiveFloat = 1e-14
    noise_rate: PositiveFloat = 1e-14
    max_sweeps: PositiveInt = 5000
    conv_window: PositiveInt = 100
    conv_tol: PositiveFloat = 1e-8
    prune_tol: PositiveFloat = 1e-6
    prune_every: PositiveInt = 100
    variance_threshold: float = Field(DEFAULT_VARIANCE_THRESHOLD)
    seed: NonNegativeInt = 0

    @field_validator("variance_threshold")
    @classmethod
    def _check_threshold(cls, v: float) -> float:
        if not 0.0 < v <= 1.0:
            raise ValueError(f"variance_threshold must be in (0, 1], got {v}")
        return v

    @field_validator("seed")
    @classmethod
    def _check_seed(cls, v: int) -> int:
        if v >= 2**64:
            raise ValueError("seed must fit in an unsigned 64-bit integer")
        return v

    @model_validator(mode="after")
    def _check_window(self) -> "Hyperparams":
        if self.conv_window >= self.max_sweeps:
            raise ValueError(f"conv_window ({self.conv_window}) must be < max_sweeps ({self.max_sweeps})")
        return self

    def resolved_k(self, n_classes: int) -> int:
        bound = n_classes - 1
        k = bound if self.k is None else self.k
        if k > bound:
            raise DataValidationError(f"k={k} exceeds C-1={bound} for a {n_classes}-class problem")
        return k


# ---------------------------
# Posterior containers
# ---------------------------


@dataclass
class GammaPosterior:
    """Gamma(shape, rate); array-valued for per-factor ARD precisions."""

    shape: np.ndarray
    rate: np.ndarray

    def __post_init__(self) -> None:
        self.shape = np.asarray(self.shape, dtype=np.float64)
        self.rate = np.asarray(self.rate, dtype=np.float64)

    @classmethod
    def prior(cls, a0: float, b0: float, size: Optional[int] = None) -> "GammaPosterior":
        if size is None:
            return cls(np.float64(a0), np.float64(b0))
        return cls(np.full(size, a0), np.full(size, b0))

    @property
    def mean(self) -> np.ndarray:
        return self.shape / self.rate

    @property
    def log_mean(self) -> np.ndarray:
        """E[ln x]."""
        return digamma(self.shape) - np.log(self.rate)

    def kl(self, a0: float, b0: float) -> float:
        """KL(q || Gamma(a0, b0)) summed over entries."""
        a, b = self.shape, self.rate
        val = (a - a0) * digamma(a) - gammaln(a) + gammaln(a0) + a0 * (np.log(b) - np.log(b0)) + a * (b0 - b) / b
        return float(np.sum(val))

    def select(self, keep: np.ndarray) -> "GammaPosterior":
        return GammaPosterior(self.shape[keep], self.rate[keep])


@dataclass
class PerSampleGaussian:
    """
    q over N latent rows: mean (N, L); covariances (P, L, L) shared by samples
    with the same observation pattern; pattern (N,) indexes into cov.
    """

    mean: np.ndarray
    cov: np.ndarray
    pattern: np.ndarray

    def __post_init__(self) -> None:
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.cov = np.asarray(self.cov, dtype=np.float64)
        self.pattern = np.asarray(self.pattern, dtype=np.int64)

    @classmethod
    def shared(cls, mean: np.ndarray, cov: np.ndarray) -> "PerSampleGaussian":
        return cls(mean, cov[None, :, :], np.zeros(mean.shape[0], dtype=np.int64))

    @property
    def n(self) -> int:
        return int(self.mean.shape[0])

    @property
    def dim(self) -> int:
        return int(self.mean.shape[1])

    def pattern_counts(self) -> np.ndarray:
        return np.bincount(self.pattern, minlength=self.cov.shape[0]).astype(np.float64)

    def sample_cov(self) -> np.ndarray:
        """(N, L, L) covariance of every sample."""
        return self.cov[self.pattern]

    def second_moment_sum(self) -> np.ndarray:
        """sum_n E[x_n x_n^T]."""
        return self.mean.T @ self.mean + np.einsum("p,pij->ij", self.pattern_counts(), self.cov)

    def weighted_second_moments(self, weights: np.ndarray) -> np.ndarray:
        """(Q, L, L): sum_n w_qn E[x_n x_n^T] for each weight row q of (Q, N)."""
        w = np.atleast_2d(weights)
        onehot = np.zeros((self.n, self.cov.shape[0]))
        onehot[np.arange(self.n), self.pattern] = 1.0
        per_pattern = w @ onehot
        outer = np.einsum("qn,ni,nj->qij", w, self.mean, self.mean, optimize=True)
        return outer + np.einsum("qp,pij->qij", per_pattern, self.cov)

    def marginal_var(self) -> np.ndarray:
        """(N, L) diagonal of every sample covariance."""
        return np.diagonal(self.cov, axis1=1, axis2=2)[self.pattern]

    def select(self, keep: np.ndarray) -> "PerSampleGaussian":
        return PerSampleGaussian(self.mean[:, keep], self.cov[:, keep][:, :, keep], self.pattern)

    def take(self, rows: np.ndarray) -> "PerSampleGaussian":
        return PerSampleGaussian(self.mean[rows], self.cov, self.pattern[rows])


@dataclass
class RowGaussianMatrix:
    """
    q over the rows of a matrix (R, L): rows independent, row r has covariance
    row_cov[row_pattern[r]].
    """

    mean: np.ndarray
    row_cov: np.ndarray
    row_pattern: np.ndarray

    def __post_init__(self) -> None:
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.row_cov = np.asarray(self.row_cov, dtype=np.float64)
        self.row_pattern = np.asarray(self.row_pattern, dtype=np.int64)

    @classmethod
    def shared(cls, mean: np.ndarray, cov: np.ndarray) -> "RowGaussianMatrix":
        return cls(mean, cov[None, :, :], np.zeros(mean.shape[0], dtype=np.int64))

    def pattern_counts(self) -> np.ndarray:
        return np.bincount(self.row_pattern, minlength=self.row_cov.shape[0]).astype(np.float64)

    def row_second_moments(self) -> np.ndarray:
        """(R, L, L): E[v_r v_r^T]."""
        return np.einsum("ri,rj->rij", self.mean, self.mean) + self.row_cov[self.row_pattern]

    def gram(self) -> np.ndarray:
        """E[M^T M] = sum_r E[v_r v_r^T]."""
        return self.mean.T @ self.mean + np.einsum("p,pij->ij", self.pattern_counts(), self.row_cov)

    def weighted_grams(self, weights: np.ndarray) -> np.ndarray:
        """(Q, L, L): sum_r w_qr E[v_r v_r^T] for each weight row q of (Q, R)."""
        w = np.atleast_2d(weights)
        onehot = np.zeros((self.mean.shape[0], self.row_cov.shape[0]))
        onehot[np.arange(self.mean.shape[0]), self.row_pattern] = 1.0
        outer = np.einsum("qr,ri,rj->qij", w, self.mean, self.mean, optimize=True)
        return outer + np.einsum("qp,pij->qij", w @ onehot, self.row_cov)

    def column_energy(self) -> np.ndarray:
        """E[||M_{:,l}||^2] per column."""
        diag = np.diagonal(self.row_cov, axis1=1, axis2=2)
        return (self.mean**2).sum(axis=0) + self.pattern_counts() @ diag

    def select(self, keep: np.ndarray) -> "RowGaussianMatrix":
        return RowGaussianMatrix(self.mean[:, keep], self.row_cov[:, keep][:, :, keep], self.row_pattern)


@dataclass
class ColumnGaussianMatrix:
    """q over the columns of a matrix (D, K): column k has covariance col_cov[k] (D, D)."""

    mean: np.ndarray
    col_cov: np.ndarray

    def __post_init__(self) -> None:
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.col_cov = np.asarray(self.col_cov, dtype=np.float64)

    def column_energy(self) -> np.ndarray:
        """E[||w_k||^2] per column."""
        return (self.mean**2).sum(axis=0) + np.trace(self.col_cov, axis1=1, axis2=2)

    def row_quadratic(self, x: np.ndarray) -> np.ndarray:
        """(N, K): x_n Sigma_k x_n^T, the variance of (x_n W)_k."""
        return np.einsum("nd,kde,ne->nk", x, self.col_cov, x)


@dataclass
class ModelState:
    hyper: Hyperparams
    preprocess: PreprocessState
    n_classes: int
    k: int
    qg: PerSampleGaussian
    qz: PerSampleGaussian
    qt: PerSampleGaussian
    qv: List[RowGaussianMatrix]
    qw: List[ColumnGaussianMatrix]
    qu: RowGaussianMatrix
    qvt: RowGaussianMatrix
    ard_v: List[GammaPosterior]
    ard_w: List[GammaPosterior]
    noise: List[GammaPosterior]
    tau: GammaPosterior
    psi_t: GammaPosterior
    xi: np.ndarray
    elbo_trace: List[float] = field(default_factory=list)
    active_h: int = 0
    prune_sweeps: List[int] = field(default_factory=list)
    sample_ids: tuple = ()
    regime: str = "s"
    meta: dict = field(default_factory=dict)

    @property
    def n_views(self) -> int:
        return len(self.qv)

    @property
    def view_names(self) -> List[str]:
        return [s.name for s in self.preprocess.specs]

    def kept_dims(self) -> List[int]:
        return [vp.kept for vp in self.preprocess.per_view]


# ---------------------------
# Initialization
# ---------------------------


def _principal_scores(d: MultiViewDataset, h: int) -> np.ndarray:
    """Per-view truncated principal scores, averaged over available views, column-standardized."""
    scores = np.zeros((d.n, h))
    counts = np.zeros(d.n)
    for block in d.blocks:
        rows = block.row_observed
        if not rows.any():
            continue
        x = block.filled(0.0)[rows]
        u, s, vt = np.linalg.svd(x, full_matrices=False)
        # deterministic signs: largest-magnitude loading of each direction positive
        idx = np.argmax(np.abs(vt), axis=1)
        signs = np.sign(vt[np.arange(vt.shape[0]), idx])
        signs[signs == 0] = 1.0
        sc = (u * s) * signs
        r = min(h, sc.shape[1])
        scores[rows, :r] += sc[:, :r]
        counts[rows] += 1.0
    scores /= np.maximum(counts, 1.0)[:, None]
    if d.n > 1:
        scores -= scores.mean(axis=0)
        std = scores.std(axis=0)
        ok = std > 1e-12
        scores[:, ok] /= std[ok]
        scores[:, ~ok] = 0.0
    return scores


def init_model(d: MultiViewDataset, p: PreprocessState, h: Hyperparams, regime: str = "s") -> ModelState:
    """
    Deterministic initial state for preprocessed data `d` given (d, h.seed).

    q(g) means: averaged principal scores; loading means (V, W, U, V^(T)) drawn
    i.i.d. N(0, 1e-2) in that order; covariances identity; Gamma posteriors at
    their priors; xi = 1; q(t) means 2y - 1 on labeled rows, 0 elsewhere.
    """
    n_classes = d.n_classes
    k = h.resolved_k(n_classes)
    dims = [s.dim for s in d.specs]
    if dims != [vp.kept for vp in p.per_view]:
        raise DataValidationError(f"dataset dims {dims} do not match preprocess kept dims {[vp.kept for vp in p.per_view]}")
    H = h.h_init
    rng = np.random.default_rng(h.seed)

    v_means = [rng.normal(0.0, LOADING_INIT_STD, size=(dm, H)) for dm in dims]
    w_means = [rng.normal(0.0, LOADING_INIT_STD, size=(dm, k)) for dm in dims]
    u_mean = rng.normal(0.0, LOADING_INIT_STD, size=(n_classes, k))
    vt_mean = rng.normal(0.0, LOADING_INIT_STD, size=(n_classes, H))

    z_mean = np.zeros((d.n, k))
    for block, wm in zip(d.blocks, w_means):
        z_mean += block.filled(0.0) @ wm
    lm = d.labels.label_mask
    t_mean = np.where(lm[:, None], 2.0 * d.labels.onehot - 1.0, 0.0)

    state = ModelState(
        hyper=h,
        preprocess=p,
        n_classes=n_classes,
        k=k,
        qg=PerSampleGaussian.shared(_principal_scores(d, H), np.eye(H)),
        qz=PerSampleGaussian.shared(z_mean, np.eye(k)),
        qt=PerSampleGaussian(t_mean, np.tile(np.eye(n_classes), (d.n, 1, 1)), np.arange(d.n)),
        qv=[RowGaussianMatrix.shared(vm, np.eye(H)) for vm in v_means],
        qw=[ColumnGaussianMatrix(wm, np.tile(np.eye(wm.shape[0]), (k, 1, 1))) for wm in w_means],
        qu=RowGaussianMatrix.shared(u_mean, np.eye(k)),
        qvt=RowGaussianMatrix.shared(vt_mean, np.eye(H)),
        ard_v=[GammaPosterior.prior(h.a0, h.b0, H) for _ in dims],
        ard_w=[GammaPosterior.prior(h.a0, h.b0, k) for _ in dims],
        noise=[GammaPosterior.prior(h.noise_shape, h.noise_rate) for _ in dims],
        tau=GammaPosterior.prior(h.noise_shape, h.noise_rate),
        psi_t=GammaPosterior.prior(h.noise_shape, h.noise_rate),
        xi=np.ones((d.n, n_classes)),
        active_h=H,
        sample_ids=d.ids,
        regime=regime,
    )
    log.info("model initialized", extra={"n": d.n, "h_init": H, "k": k, "views": len(dims), "seed": h.seed})
    return state


__all__ = [
    "Hyperparams",
    "GammaPosterior",
    "PerSampleGaussian",
    "RowGaussianMatrix",
    "ColumnGaussianMatrix",
    "ModelState",
    "init_model",
]
