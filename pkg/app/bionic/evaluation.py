from __future__ import annotations

"""
Class-stratified cross-validation, ranking/accuracy metrics and the
supervision-regime comparison (S / SS / TSS).

Per fold:
  s   : fit on the labeled training rows
  ss  : fit on the training rows plus any extra unlabeled rows
  tss : as ss, plus the held-out inputs with their labels masked
Predictions are made on the held-out fold only; AUC and BACC are aggregated as
mean and sample (n - 1) standard deviation over folds.
"""

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from scipy.stats import rankdata
from sklearn.model_selection import StratifiedKFold

from .classify import labels_from_proba, predict_proba
from .dataset import MultiViewDataset, concat, subset
from .errors import DataValidationError
from .inference import REGIMES, fit
from .logging_setup import get_logger
from .model import Hyperparams
from .settings import settings

DEFAULT_FOLDS = 10

log = get_logger(__name__, component="evaluation")


# ---------------------------
# Metrics
# ---------------------------


def auc(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Mann-Whitney AUC: P(score_pos > score_neg) with ties counted 0.5."""
    s = np.asarray(scores, dtype=np.float64).reshape(-1)
    y = np.asarray(labels).reshape(-1).astype(bool)
    if s.shape != y.shape:
        raise DataValidationError(f"{s.size} scores for {y.size} labels")
    n_pos = int(y.sum())
    n_neg = int(y.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise DataValidationError("AUC needs both classes")
    ranks = rankdata(s, method="average")
    return float((ranks[y].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def multiclass_auc(proba: np.ndarray, labels: Sequence[int]) -> float:
    """Binary: AUC of the class-1 probability. Otherwise the macro one-vs-rest mean over present classes."""
    y = np.asarray(labels, dtype=np.int64)
    p = np.atleast_2d(proba)
    if p.shape[1] == 2:
        return auc(p[:, 1], y == 1)
    present = np.unique(y)
    if present.size < 2:
        raise DataValidationError("AUC needs at least two classes")
    return float(np.mean([auc(p[:, c], y == c) for c in present]))


def bacc(preds: Sequence[int], labels: Sequence[int]) -> float:
    """Mean per-class recall over the classes present in `labels`."""
    p = np.asarray(preds, dtype=np.int64).reshape(-1)
    y = np.asarray(labels, dtype=np.int64).reshape(-1)
    if y.size == 0:
        raise DataValidationError("balanced accuracy of an empty set")
    if p.shape != y.shape:
        raise DataValidationError(f"{p.size} predictions for {y.size} labels")
    return float(np.mean([np.mean(p[y == c] == c) for c in np.unique(y)]))


# ---------------------------
# Folds
# ---------------------------


def stratified_folds(labels: Sequence[int], k: int = DEFAULT_FOLDS, seed: int = 0) -> List[np.ndarray]:
    """k disjoint test-index arrays covering every position of `labels`."""
    y = np.asarray(labels, dtype=np.int64).reshape(-1)
    if k < 2:
        raise DataValidationError(f"need k >= 2 folds, got {k}")
    if k > y.size:
        raise DataValidationError(f"k={k} folds for {y.size} samples")
    counts = np.bincount(y)
    smallest = int(counts[counts > 0].min())
    if smallest < k:
        log.warning("a class has fewer members than folds; stratification is best effort", extra={"k": k, "smallest_class": smallest})
    skf = StratifiedKFold(n_splits=k, shuffle=True, random_state=seed)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        return [np.sort(test) for _, test in skf.split(np.zeros(y.size), y)]


# ---------------------------
# Cross-validation
# ---------------------------


@dataclass
class FoldMetrics:
    fold: int
    n_train: int
    n_test: int
    auc: Optional[float]
    bacc: float
    active_h: int
    sweeps: int


@dataclass
class CVResult:
    regime: str
    folds: List[FoldMetrics]
    auc_mean: float
    auc_sd: float
    bacc_mean: float
    bacc_sd: float
    predictions: pd.DataFrame = field(default_factory=pd.DataFrame, repr=False)

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame([asdict(f) for f in self.folds])
        summary = pd.DataFrame(
            [
                {"fold": "mean", "auc": self.auc_mean, "bacc": self.bacc_mean},
                {"fold": "sd", "auc": self.auc_sd, "bacc": self.bacc_sd},
            ]
        )
        frame["fold"] = frame["fold"].astype(object)
        return pd.concat([frame, summary], ignore_index=True)

    def summary(self) -> str:
        return f"regime={self.regime} AUC {_pm(self.auc_mean, self.auc_sd)} BACC {_pm(self.bacc_mean, self.bacc_sd)}"


def _pm(mean: float, sd: float) -> str:
    return f"{mean:.3f} ± {sd:.3f}"


def _mean_sd(values: Sequence[float]) -> tuple[float, float]:
    arr = np.asarray([v for v in values if v is not None], dtype=np.float64)
    if arr.size == 0:
        return float("nan"), float("nan")
    sd = float(arr.std(ddof=1)) if arr.size >= 2 else float("nan")
    return float(arr.mean()), sd


def _run_fold(
    fold: int,
    d: MultiViewDataset,
    train_idx: np.ndarray,
    test_idx: np.ndarray,
    h: Hyperparams,
    regime: str,
    extra_unlabeled: Optional[MultiViewDataset],
) -> tuple[FoldMetrics, pd.DataFrame]:
    flog = log.bind(fold=fold, regime=regime)
    train = subset(d, train_idx)
    test = subset(d, test_idx)
    if regime == "tss":
        extra = test if extra_unlabeled is None else concat(extra_unlabeled, test)
    else:
        extra = extra_unlabeled
    state = fit(train, h, regime=regime, extra_unlabeled=extra)

    proba = predict_proba(state, test)
    preds = labels_from_proba(proba)
    y = test.labels.classes
    fold_auc: Optional[float]
    if np.unique(y).size < 2:
        flog.warning("single class in the test fold; AUC left undefined")
        fold_auc = None
    else:
        fold_auc = multiclass_auc(proba, y)
    metrics = FoldMetrics(
        fold=fold,
        n_train=int(train.n),
        n_test=int(test.n),
        auc=fold_auc,
        bacc=bacc(preds, y),
        active_h=state.active_h,
        sweeps=len(state.elbo_trace),
    )
    frame = pd.DataFrame(proba, columns=[f"prob_{c}" for c in range(proba.shape[1])])
    frame.insert(0, "id", list(test.ids))
    frame.insert(1, "fold", fold)
    frame["pred"] = preds
    frame["label"] = y
    flog.info("fold done", extra={"auc": fold_auc, "bacc": metrics.bacc, "active_h": state.active_h})
    return metrics, frame


def run_cv(
    d: MultiViewDataset,
    h: Hyperparams,
    regime: str = "s",
    k: int = DEFAULT_FOLDS,
    seed: int = 0,
    extra_unlabeled: Optional[MultiViewDataset] = None,
) -> CVResult:
    """
    Stratified k-fold over the labeled rows of `d`. Unlabeled rows of `d` stay
    in every training split (the supervised regime drops them inside fit).
    Folds run on up to BIONIC_THREADS worker threads.
    """
    regime = regime.lower()
    if regime not in REGIMES:
        raise DataValidationError(f"unknown regime {regime!r}, expected one of {REGIMES}")
    labeled = np.flatnonzero(d.labels.label_mask)
    unlabeled = np.flatnonzero(~d.labels.label_mask)
    folds = stratified_folds(d.labels.classes[labeled], k, seed)
    splits = []
    for test_pos in folds:
        test_idx = labeled[test_pos]
        train_idx = np.sort(np.concatenate([np.setdiff1d(labeled, test_idx), unlabeled]))
        splits.append((train_idx, test_idx))

    workers = max(1, min(settings.threads, len(splits)))
    log.info("cross-validation start", extra={"regime": regime, "k": k, "seed": seed, "workers": workers})
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [
            pool.submit(_run_fold, i, d, tr, te, h, regime, extra_unlabeled) for i, (tr, te) in enumerate(splits)
        ]
        results = [f.result() for f in futures]

    fold_metrics = [r[0] for r in results]
    auc_mean, auc_sd = _mean_sd([f.auc for f in fold_metrics])
    bacc_mean, bacc_sd = _mean_sd([f.bacc for f in fold_metrics])
    res = CVResult(
        regime=regime,
        folds=fold_metrics,
        auc_mean=auc_mean,
        auc_sd=auc_sd,
        bacc_mean=bacc_mean,
        bacc_sd=bacc_sd,
        predictions=pd.concat([r[1] for r in results], ignore_index=True),
    )
    log.info(res.summary(), extra={"regime": regime, "auc_mean": auc_mean, "bacc_mean": bacc_mean})
    return res


@dataclass
class RegimeTable:
    results: Dict[str, CVResult]

    def to_frame(self) -> pd.DataFrame:
        rows = [
            {
                "regime": r.upper(),
                "auc_mean": res.auc_mean,
                "auc_sd": res.auc_sd,
                "bacc_mean": res.bacc_mean,
                "bacc_sd": res.bacc_sd,
            }
            for r, res in self.results.items()
        ]
        return pd.DataFrame(rows)

    def formatted(self) -> pd.DataFrame:
        """One row per regime, AUC and BACC as 'mean ± sd' cells."""
        rows = [
            {"regime": r.upper(), "AUC": _pm(res.auc_mean, res.auc_sd), "BACC": _pm(res.bacc_mean, res.bacc_sd)}
            for r, res in self.results.items()
        ]
        return pd.DataFrame(rows).set_index("regime")


def run_regime_experiment(
    d: MultiViewDataset,
    h: Hyperparams,
    k: int = DEFAULT_FOLDS,
    seed: int = 0,
    extra_unlabeled: Optional[MultiViewDataset] = None,
) -> RegimeTable:
    """run_cv under S, SS and TSS with the same folds and seeds."""
    return RegimeTable(results={r: run_cv(d, h, r, k, seed, extra_unlabeled) for r in REGIMES})


__all__ = [
    "DEFAULT_FOLDS",
    "auc",
    "multiclass_auc",
    "bacc",
    "stratified_folds",
    "FoldMetrics",
    "CVResult",
    "run_cv",
    "RegimeTable",
    "run_regime_experiment",
]
