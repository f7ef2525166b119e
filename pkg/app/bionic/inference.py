from __future__ import annotations

"""
Coordinate-ascent mean-field inference for the multi-view latent model.

One sweep updates, in this order:

    q(g) -> q(V^(m)) for every m -> q(V^(T)) -> q(z) -> q(W^(m)) for every m
    -> q(U) -> q(t) -> xi -> alpha_V, alpha_W -> psi_m, tau, psi_T

Every step is the closed-form conjugate optimum given all other factors, so the
evidence lower bound never decreases across a sweep (pruning sweeps excepted).

Observation handling:
  - view likelihood terms run over observed entries only; a sample without
    view m contributes nothing to q(V^(m)) or psi_m
  - the discriminative latent aggregates observed entries only (zero-filled
    inputs), the raw sum over available views
  - logistic-bound terms exist for labeled samples only; unlabeled samples
    reach t through the generative and discriminative pathways

Public API
----------
PreparedData.from_dataset(d)
coordinate_sweep(s, d) -> ModelState
compute_elbo(s, d) -> float
parameter_kl(s) -> dict
has_converged(trace, window, tol) -> bool
prune_factors(s) -> ModelState
fit(d, h, regime="s", extra_unlabeled=None) -> ModelState
posterior_g(s, prep, include_output) -> PerSampleGaussian
embed_samples(s, d_pre) -> (qg, qz)
"""

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import log_expit

from .dataset import MultiViewDataset, concat, subset, validate_dataset, with_labels_masked
from .errors import DataValidationError, NumericalError
from .linalg import spd_inverse, spd_inverse_batch, logdet_batch, unique_rows
from .logging_setup import get_logger
from .model import (
    ColumnGaussianMatrix,
    GammaPosterior,
    Hyperparams,
    ModelState,
    PerSampleGaussian,
    RowGaussianMatrix,
    init_model,
)
from .preprocess import apply_preprocess, fit_preprocess
from .settings import settings

LOG_2PI = float(np.log(2.0 * np.pi))
REGIMES = ("s", "ss", "tss")

log = get_logger(__name__, component="inference")


# ---------------------------
# Data prepared for the sweep
# ---------------------------


@dataclass(frozen=True, eq=False)
class PreparedData:
    """Zero-filled views, masks and observation patterns of a preprocessed dataset."""

    x: tuple  # per view (N, D), unobserved entries 0
    mask: tuple  # per view (N, D) bool
    n_obs: tuple  # per view observed entry count
    sq_sum: tuple  # per view sum of squared observed entries
    xtx: tuple  # per view X^T X on the zero-filled matrix
    g_patterns: tuple  # per view (P, D) float masks of the joint sample patterns
    g_index: np.ndarray  # (N,) joint pattern of each sample
    v_patterns: tuple  # per view (Q, N) float: which samples observe a column group
    v_index: tuple  # per view (D,) column group of each feature
    onehot: np.ndarray
    labeled: np.ndarray  # (N,) bool
    ids: tuple

    @property
    def n(self) -> int:
        return int(self.onehot.shape[0])

    @property
    def n_classes(self) -> int:
        return int(self.onehot.shape[1])

    @property
    def dims(self) -> List[int]:
        return [x.shape[1] for x in self.x]

    @classmethod
    def from_dataset(cls, d: MultiViewDataset) -> "PreparedData":
        xs, masks = [], []
        for b in d.blocks:
            masks.append(np.asarray(b.mask, dtype=bool))
            xs.append(b.filled(0.0))
        joint = np.hstack(masks) if d.n else np.zeros((0, sum(m.shape[1] for m in masks)), dtype=bool)
        pats, g_index = unique_rows(joint)
        offsets = np.cumsum([0] + [m.shape[1] for m in masks])
        g_patterns = tuple(pats[:, offsets[i] : offsets[i + 1]].astype(np.float64) for i in range(len(masks)))
        v_patterns, v_index = [], []
        for m in masks:
            vp, vi = unique_rows(m.T) if d.n else (np.zeros((1, 0), dtype=bool), np.zeros(m.shape[1], dtype=np.int64))
            v_patterns.append(vp.astype(np.float64))
            v_index.append(vi)
        return cls(
            x=tuple(xs),
            mask=tuple(masks),
            n_obs=tuple(int(m.sum()) for m in masks),
            sq_sum=tuple(float((x**2).sum()) for x in xs),
            xtx=tuple(x.T @ x for x in xs),
            g_patterns=g_patterns,
            g_index=g_index,
            v_patterns=tuple(v_patterns),
            v_index=tuple(v_index),
            onehot=np.asarray(d.labels.onehot, dtype=np.float64),
            labeled=np.asarray(d.labels.label_mask, dtype=bool),
            ids=d.ids,
        )


DataLike = Union[MultiViewDataset, PreparedData]


def _prepared(d: DataLike) -> PreparedData:
    return d if isinstance(d, PreparedData) else PreparedData.from_dataset(d)


def _check_shapes(s: ModelState, prep: PreparedData) -> None:
    if prep.dims != [qv.mean.shape[0] for qv in s.qv]:
        raise DataValidationError(f"view dims {prep.dims} do not match the model {[qv.mean.shape[0] for qv in s.qv]}")
    if prep.n != s.qg.n or prep.n_classes != s.n_classes:
        raise DataValidationError(f"data has {prep.n} samples / {prep.n_classes} classes, state {s.qg.n} / {s.n_classes}")


def _jj_lambda(xi: np.ndarray) -> np.ndarray:
    """tanh(xi/2) / (4 xi), with the xi -> 0 limit 1/8."""
    xi = np.abs(np.asarray(xi, dtype=np.float64))
    small = xi < 1e-8
    safe = np.where(small, 1.0, xi)
    return np.where(small, 0.125, np.tanh(safe / 2.0) / (4.0 * safe))


def _z_inputs(s: ModelState, prep: PreparedData, skip: Optional[int] = None) -> np.ndarray:
    """sum_m x^(m) E[W^(m)] over observed entries, optionally leaving one view out."""
    a = np.zeros((prep.n, s.k))
    for m, (x, qw) in enumerate(zip(prep.x, s.qw)):
        if m != skip:
            a += x @ qw.mean
    return a


# ---------------------------
# Factor updates
# ---------------------------


def posterior_g(s: ModelState, prep: PreparedData, include_output: bool = True) -> PerSampleGaussian:
    """
    Conjugate q(g) for every sample given the current loadings.

    precision_p = I + sum_m E[psi_m] sum_{d observed in p} E[v_d v_d^T] (+ E[psi_T] E[V^(T)T V^(T)])
    mean_n      = cov_p (sum_m E[psi_m] x_n E[V^(m)] (+ E[psi_T] (E[t_n] - E[z_n] E[U]^T) E[V^(T)]))

    With include_output=False only the views inform g (new samples).
    """
    h = s.active_h
    n_pat = prep.g_patterns[0].shape[0] if prep.g_patterns else 0
    prec = np.broadcast_to(np.eye(h), (n_pat, h, h)).copy()
    lin = np.zeros((prep.n, h))
    for m, qv in enumerate(s.qv):
        psi = float(s.noise[m].mean)
        prec += psi * qv.weighted_grams(prep.g_patterns[m])
        lin += psi * (prep.x[m] @ qv.mean)
    if include_output:
        psi_t = float(s.psi_t.mean)
        prec += psi_t * s.qvt.gram()[None, :, :]
        lin += psi_t * (s.qt.mean - s.qz.mean @ s.qu.mean.T) @ s.qvt.mean
    cov, _ = spd_inverse_batch(prec)
    mean = np.zeros_like(lin)
    for p in range(n_pat):
        rows = prep.g_index == p
        mean[rows] = lin[rows] @ cov[p]
    return PerSampleGaussian(mean, cov, prep.g_index)


def update_g(s: ModelState, prep: PreparedData) -> None:
    s.qg = posterior_g(s, prep, include_output=True)


def update_v(s: ModelState, prep: PreparedData, m: int) -> None:
    """Rows of V^(m) grouped by the set of samples observing the feature."""
    psi = float(s.noise[m].mean)
    alpha = s.ard_v[m].mean
    stats = s.qg.weighted_second_moments(prep.v_patterns[m])
    prec = np.diag(alpha)[None, :, :] + psi * stats
    cov, _ = spd_inverse_batch(prec)
    lin = psi * (prep.x[m].T @ s.qg.mean)
    mean = np.einsum("dij,dj->di", cov[prep.v_index[m]], lin)
    s.qv[m] = RowGaussianMatrix(mean, cov, prep.v_index[m])


def update_vt(s: ModelState, prep: PreparedData) -> None:
    psi_t = float(s.psi_t.mean)
    cov, _ = spd_inverse(np.eye(s.active_h) + psi_t * s.qg.second_moment_sum())
    resid = s.qt.mean - s.qz.mean @ s.qu.mean.T
    mean = psi_t * (resid.T @ s.qg.mean) @ cov
    s.qvt = RowGaussianMatrix.shared(mean, cov)


def update_z(s: ModelState, prep: PreparedData) -> None:
    tau = float(s.tau.mean)
    psi_t = float(s.psi_t.mean)
    cov, _ = spd_inverse(tau * np.eye(s.k) + psi_t * s.qu.gram())
    lin = tau * _z_inputs(s, prep) + psi_t * (s.qt.mean - s.qg.mean @ s.qvt.mean.T) @ s.qu.mean
    s.qz = PerSampleGaussian.shared(lin @ cov, cov)


def update_w(s: ModelState, prep: PreparedData, m: int) -> None:
    """Columns of W^(m) are independent under the isotropic z noise."""
    tau = float(s.tau.mean)
    alpha = s.ard_w[m].mean
    resid = s.qz.mean - _z_inputs(s, prep, skip=m)
    xty = tau * (prep.x[m].T @ resid)
    dim = prep.xtx[m].shape[0]
    means = np.zeros((dim, s.k))
    covs = np.zeros((s.k, dim, dim))
    for k in range(s.k):
        covs[k], _ = spd_inverse(tau * prep.xtx[m] + alpha[k] * np.eye(dim))
        means[:, k] = covs[k] @ xty[:, k]
    s.qw[m] = ColumnGaussianMatrix(means, covs)


def update_u(s: ModelState, prep: PreparedData) -> None:
    psi_t = float(s.psi_t.mean)
    cov, _ = spd_inverse(np.eye(s.k) + psi_t * s.qz.second_moment_sum())
    resid = s.qt.mean - s.qg.mean @ s.qvt.mean.T
    mean = psi_t * (resid.T @ s.qz.mean) @ cov
    s.qu = RowGaussianMatrix.shared(mean, cov)


def update_t(s: ModelState, prep: PreparedData) -> None:
    psi_t = float(s.psi_t.mean)
    lab = prep.labeled[:, None].astype(np.float64)
    prec = psi_t + 2.0 * _jj_lambda(s.xi) * lab
    pred = s.qz.mean @ s.qu.mean.T + s.qg.mean @ s.qvt.mean.T
    mean = (psi_t * pred + lab * (prep.onehot - 0.5)) / prec
    cov = np.zeros((prep.n, s.n_classes, s.n_classes))
    idx = np.arange(s.n_classes)
    cov[:, idx, idx] = 1.0 / prec
    s.qt = PerSampleGaussian(mean, cov, np.arange(prep.n))


def update_xi(s: ModelState, prep: PreparedData) -> None:
    """xi^2 = E[t^2] on labeled rows; unlabeled rows keep their value."""
    second = s.qt.mean**2 + s.qt.marginal_var()
    s.xi = np.where(prep.labeled[:, None], np.sqrt(second), s.xi)


def update_ard(s: ModelState, prep: PreparedData) -> None:
    h = s.hyper
    for m, dim in enumerate(prep.dims):
        s.ard_v[m] = GammaPosterior(np.full(s.active_h, h.a0 + dim / 2.0), h.b0 + 0.5 * s.qv[m].column_energy())
        s.ard_w[m] = GammaPosterior(np.full(s.k, h.a0 + dim / 2.0), h.b0 + 0.5 * s.qw[m].column_energy())


def _view_sse(s: ModelState, prep: PreparedData, m: int) -> float:
    """sum over observed (n, d) of E[(x_nd - g_n v_d)^2]."""
    qv = s.qv[m]
    cross = float(np.sum(prep.x[m] * (s.qg.mean @ qv.mean.T)))
    groups = np.zeros((prep.v_patterns[m].shape[0], qv.mean.shape[0]))
    groups[prep.v_index[m], np.arange(qv.mean.shape[0])] = 1.0
    g_stats = s.qg.weighted_second_moments(prep.v_patterns[m])
    v_stats = qv.weighted_grams(groups)
    return prep.sq_sum[m] - 2.0 * cross + float(np.sum(g_stats * v_stats))


def _z_sse(s: ModelState, prep: PreparedData) -> float:
    """sum_n E||z_n - sum_m x_n^(m) W^(m)||^2."""
    a = _z_inputs(s, prep)
    total = float(np.trace(s.qz.second_moment_sum())) - 2.0 * float(np.sum(s.qz.mean * a)) + float(np.sum(a**2))
    for m, qw in enumerate(s.qw):
        total += float(np.einsum("kde,ed->", qw.col_cov, prep.xtx[m]))
    return total


def _t_sse(s: ModelState, prep: PreparedData) -> float:
    """sum_n E||t_n - z_n U^T - g_n V^(T)T||^2."""
    mz = s.qz.mean @ s.qu.mean.T
    mg = s.qg.mean @ s.qvt.mean.T
    total = float(np.trace(s.qt.second_moment_sum()))
    total -= 2.0 * float(np.sum(s.qt.mean * (mz + mg)))
    total += float(np.sum(s.qz.second_moment_sum() * s.qu.gram()))
    total += 2.0 * float(np.sum(mz * mg))
    total += float(np.sum(s.qg.second_moment_sum() * s.qvt.gram()))
    return total


def update_noise(s: ModelState, prep: PreparedData) -> None:
    h = s.hyper
    for m in range(len(s.qv)):
        s.noise[m] = GammaPosterior(
            h.noise_shape + prep.n_obs[m] / 2.0, h.noise_rate + 0.5 * max(_view_sse(s, prep, m), 0.0)
        )
    s.tau = GammaPosterior(h.noise_shape + prep.n * s.k / 2.0, h.noise_rate + 0.5 * max(_z_sse(s, prep), 0.0))
    s.psi_t = GammaPosterior(
        h.noise_shape + prep.n * s.n_classes / 2.0, h.noise_rate + 0.5 * max(_t_sse(s, prep), 0.0)
    )


def coordinate_sweep(s: ModelState, d: DataLike) -> ModelState:
    """One full update cycle in the fixed order; mutates and returns `s`."""
    prep = _prepared(d)
    _check_shapes(s, prep)
    update_g(s, prep)
    for m in range(len(s.qv)):
        update_v(s, prep, m)
    update_vt(s, prep)
    update_z(s, prep)
    for m in range(len(s.qw)):
        update_w(s, prep, m)
    update_u(s, prep)
    update_t(s, prep)
    update_xi(s, prep)
    update_ard(s, prep)
    update_noise(s, prep)
    return s


# ---------------------------
# Lower bound
# ---------------------------


def _gaussian_kl_rows(mean: np.ndarray, covs: np.ndarray, counts: np.ndarray, alpha: np.ndarray, log_alpha: np.ndarray) -> float:
    """sum over rows of E_alpha KL(N(mu_r, S_r) || N(0, diag(alpha)^-1))."""
    rows, dim = mean.shape
    energy = (mean**2).sum(axis=0) + counts @ np.diagonal(covs, axis1=1, axis2=2)
    return 0.5 * float(alpha @ energy - rows * dim - counts @ logdet_batch(covs) - rows * log_alpha.sum())


def parameter_kl(s: ModelState) -> Dict[str, float]:
    """KL divergences of every global factor from its prior (loadings under expected ARD precisions)."""
    h = s.hyper
    kv = kw = 0.0
    for qv, ard in zip(s.qv, s.ard_v):
        kv += _gaussian_kl_rows(qv.mean, qv.row_cov, qv.pattern_counts(), ard.mean, ard.log_mean)
    for qw, ard in zip(s.qw, s.ard_w):
        dim = qw.mean.shape[0]
        energy = qw.column_energy()
        kw += 0.5 * float(ard.mean @ energy - dim * s.k - logdet_batch(qw.col_cov).sum() - dim * ard.log_mean.sum())
    ones_k, ones_h = np.ones(s.k), np.ones(s.active_h)
    return {
        "V": kv,
        "W": kw,
        "U": _gaussian_kl_rows(s.qu.mean, s.qu.row_cov, s.qu.pattern_counts(), ones_k, np.zeros_like(ones_k)),
        "VT": _gaussian_kl_rows(s.qvt.mean, s.qvt.row_cov, s.qvt.pattern_counts(), ones_h, np.zeros_like(ones_h)),
        "alpha_V": sum(a.kl(h.a0, h.b0) for a in s.ard_v),
        "alpha_W": sum(a.kl(h.a0, h.b0) for a in s.ard_w),
        "psi": sum(g.kl(h.noise_shape, h.noise_rate) for g in s.noise),
        "tau": s.tau.kl(h.noise_shape, h.noise_rate),
        "psi_T": s.psi_t.kl(h.noise_shape, h.noise_rate),
    }


def compute_elbo(s: ModelState, d: DataLike) -> float:
    """Evidence lower bound of the current state; deterministic, raises on a non-finite value."""
    prep = _prepared(d)
    _check_shapes(s, prep)
    n, k, c = prep.n, s.k, s.n_classes
    total = 0.0
    for m, psi in enumerate(s.noise):
        total += 0.5 * prep.n_obs[m] * (float(psi.log_mean) - LOG_2PI) - 0.5 * float(psi.mean) * _view_sse(s, prep, m)
    total += 0.5 * n * k * (float(s.tau.log_mean) - LOG_2PI) - 0.5 * float(s.tau.mean) * _z_sse(s, prep)
    total += 0.5 * n * c * (float(s.psi_t.log_mean) - LOG_2PI) - 0.5 * float(s.psi_t.mean) * _t_sse(s, prep)

    if prep.labeled.any():
        lab = prep.labeled
        xi = s.xi[lab]
        sign = 2.0 * prep.onehot[lab] - 1.0
        second = s.qt.mean[lab] ** 2 + s.qt.marginal_var()[lab]
        total += float(np.sum(log_expit(xi) + 0.5 * (sign * s.qt.mean[lab] - xi) - _jj_lambda(xi) * (second - xi**2)))

    counts = s.qg.pattern_counts()
    kl_g = 0.5 * float(
        counts @ (np.trace(s.qg.cov, axis1=1, axis2=2) - logdet_batch(s.qg.cov))
        + np.sum(s.qg.mean**2)
        - n * s.active_h
    )
    ent_z = 0.5 * float(n * k * (1.0 + LOG_2PI) + s.qz.pattern_counts() @ logdet_batch(s.qz.cov))
    ent_t = 0.5 * float(n * c * (1.0 + LOG_2PI) + s.qt.pattern_counts() @ logdet_batch(s.qt.cov))
    total += ent_z + ent_t - kl_g - sum(parameter_kl(s).values())
    if not np.isfinite(total):
        raise NumericalError("non-finite evidence lower bound")
    return float(total)


# ---------------------------
# Convergence and pruning
# ---------------------------


def has_converged(trace: Sequence[float], window: int, tol: float) -> bool:
    """|L_T - L_{T-window}| <= tol * |L_T| once the trace holds window + 1 values."""
    if len(trace) < window + 1:
        return False
    last, past = trace[-1], trace[-1 - window]
    return abs(last - past) <= tol * abs(last)


def prune_factors(s: ModelState) -> ModelState:
    """
    Drop generative factors whose expected loading energy
    sum_m E||V^(m)_{:,h}||^2, relative to the strongest factor, falls below
    prune_tol. Discriminative factors stay.

    A switched-off column has E[alpha_h] growing by about psi * N per sweep,
    so both its mean and its covariance part shrink toward zero.
    """
    energy = np.sum([qv.column_energy() for qv in s.qv], axis=0)
    top = float(energy.max()) if energy.size else 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        keep = (energy / top) >= s.hyper.prune_tol if top > 0 else np.zeros(energy.shape, dtype=bool)
    if not keep.any():
        keep = np.zeros(energy.shape, dtype=bool)
        keep[int(np.argmax(energy))] = True
        log.warning("every generative factor fell below the pruning threshold; keeping the largest", extra={"h": s.active_h})
    if keep.all():
        return s
    idx = np.flatnonzero(keep)
    s.qg = s.qg.select(idx)
    s.qv = [qv.select(idx) for qv in s.qv]
    s.qvt = s.qvt.select(idx)
    s.ard_v = [a.select(idx) for a in s.ard_v]
    log.info("factors pruned", extra={"before": s.active_h, "after": int(idx.size)})
    s.active_h = int(idx.size)
    return s


# ---------------------------
# Fit
# ---------------------------


def training_rows(d: MultiViewDataset, regime: str, extra_unlabeled: Optional[MultiViewDataset] = None) -> MultiViewDataset:
    """
    Rows a fit sees under a supervision regime.

    s   : labeled rows of `d` only
    ss  : every row of `d` plus the extra rows with their labels masked
    tss : same assembly; the extra rows are the test inputs
    """
    regime = regime.lower()
    if regime not in REGIMES:
        raise DataValidationError(f"unknown regime {regime!r}, expected one of {REGIMES}")
    if regime == "s":
        if extra_unlabeled is not None and extra_unlabeled.n:
            log.warning("extra unlabeled rows are ignored under the supervised regime", extra={"rows": extra_unlabeled.n})
        return subset(d, np.flatnonzero(d.labels.label_mask))
    if extra_unlabeled is None or extra_unlabeled.n == 0:
        return d
    return concat(d, with_labels_masked(extra_unlabeled))


def fit(
    d: MultiViewDataset,
    h: Hyperparams,
    regime: str = "s",
    extra_unlabeled: Optional[MultiViewDataset] = None,
) -> ModelState:
    """
    Preprocess on the training inputs, initialize, then sweep until the bound
    converges or max_sweeps is reached, pruning every prune_every sweeps.
    """
    regime = regime.lower()
    train = training_rows(d, regime, extra_unlabeled)
    if train.n == 0:
        raise DataValidationError("no training rows for this regime")
    if regime == "s" and not train.labels.label_mask.any():
        raise DataValidationError("the supervised regime needs at least one labeled sample")
    validate_dataset(train)

    p = fit_preprocess(train, h.variance_threshold)
    d_pre = apply_preprocess(p, train)
    s = init_model(d_pre, p, h, regime=regime)
    prep = PreparedData.from_dataset(d_pre)
    flog = log.bind(regime=regime, seed=h.seed)

    for sweep in range(1, h.max_sweeps + 1):
        coordinate_sweep(s, prep)
        pruned = False
        if sweep % h.prune_every == 0:
            before = s.active_h
            prune_factors(s)
            if s.active_h < before:
                pruned = True
                s.prune_sweeps.append(len(s.elbo_trace))
        elbo = compute_elbo(s, prep)
        if s.elbo_trace and not pruned:
            prev = s.elbo_trace[-1]
            if elbo < prev - 1e-9 * max(1.0, abs(prev)):
                flog.warning("lower bound decreased", extra={"sweep": sweep, "elbo": elbo, "previous": prev})
        s.elbo_trace.append(elbo)
        if sweep % settings.progress_every == 0:
            flog.info(
                f"sweep={sweep} elbo={elbo:.6f} active_h={s.active_h}",
                extra={"sweep": sweep, "elbo": elbo, "active_h": s.active_h},
            )
        if has_converged(s.elbo_trace, h.conv_window, h.conv_tol):
            break

    converged = has_converged(s.elbo_trace, h.conv_window, h.conv_tol)
    flog.info(
        "fit finished",
        extra={"sweeps": len(s.elbo_trace), "elbo": s.elbo_trace[-1], "active_h": s.active_h, "converged": converged},
    )
    return s


# ---------------------------
# New samples
# ---------------------------


def embed_samples(s: ModelState, d_pre: MultiViewDataset) -> Tuple[PerSampleGaussian, PerSampleGaussian]:
    """
    q(g) and q(z) for preprocessed samples with loadings held fixed.

    q(g) is one conjugate update from the observed views only; q(z) is the
    discriminative aggregation marginalized over q(W):
    mean sum_m x E[W^(m)], variance 1/E[tau] + sum_m x Sigma_k x^T per factor.
    """
    if d_pre.n and not d_pre.view_observed().any(axis=1).all():
        raise DataValidationError("every sample needs at least one observed view")
    prep = PreparedData.from_dataset(d_pre)
    if prep.dims != [qv.mean.shape[0] for qv in s.qv]:
        raise DataValidationError(f"view dims {prep.dims} do not match the model")
    qg = posterior_g(s, prep, include_output=False)
    var = np.full((prep.n, s.k), 1.0 / float(s.tau.mean))
    for x, qw in zip(prep.x, s.qw):
        var += qw.row_quadratic(x)
    cov = np.zeros((prep.n, s.k, s.k))
    idx = np.arange(s.k)
    cov[:, idx, idx] = var
    qz = PerSampleGaussian(_z_inputs(s, prep), cov, np.arange(prep.n))
    return qg, qz


__all__ = [
    "REGIMES",
    "PreparedData",
    "posterior_g",
    "coordinate_sweep",
    "compute_elbo",
    "parameter_kl",
    "has_converged",
    "prune_factors",
    "training_rows",
    "fit",
    "embed_samples",
]
