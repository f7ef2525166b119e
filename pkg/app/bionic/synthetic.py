from __future__ import annotations

"""
Forward sampler of the generative process plus small exact oracles.

generate_synthetic runs the model forward:

    g ~ N(0, I_H)
    x^(m) = g V^(m)T + e,            e ~ N(0, 1/psi_m)
    z = sum_m x^(m) W^(m) + e_z,     e_z ~ N(0, 1/tau)
    t = z U^T + g V^(T)T + e_t,      e_t ~ N(0, 1/psi_T)
    y ~ Categorical(softmax(label_scale * t))

Everything is a pure function of the spec and its seed.
"""

from dataclasses import dataclass
from typing import List, Literal, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, NonNegativeInt, PositiveFloat, PositiveInt
from pydantic.functional_validators import field_validator, model_validator
from scipy.special import softmax
from scipy.stats import norm

from .dataset import LabelBlock, MultiViewDataset, ViewBlock, ViewSpec
from .errors import DataValidationError, NumericalError
from .logging_setup import get_logger

log = get_logger(__name__, component="synthetic")

Rate = float


class SyntheticSpec(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    n: PositiveInt = 200
    dims: List[PositiveInt] = Field(default_factory=lambda: [10, 8])
    kinds: Optional[List[Literal["structured", "embedding"]]] = None
    h_true: PositiveInt = 4
    k_true: PositiveInt = 1
    noise: Optional[List[PositiveFloat]] = None  # per-view precision, default 10
    tau: PositiveFloat = 10.0
    psi_t: PositiveFloat = 10.0
    label_scale: PositiveFloat = 1.0
    n_classes: int = 2
    entry_missing: Optional[List[Rate]] = None
    view_missing: Optional[List[Rate]] = None
    label_missing: Rate = 0.0
    seed: NonNegativeInt = 0

    @field_validator("n_classes")
    @classmethod
    def _check_classes(cls, v: int) -> int:
        if v < 2:
            raise ValueError("n_classes must be >= 2")
        return v

    @field_validator("label_missing")
    @classmethod
    def _check_label_rate(cls, v: float) -> float:
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"label_missing must be in [0, 1], got {v}")
        return v

    @model_validator(mode="after")
    def _check_lengths(self) -> "SyntheticSpec":
        m = len(self.dims)
        if m == 0:
            raise ValueError("need at least one view")
        for name in ("kinds", "noise", "entry_missing", "view_missing"):
            val = getattr(self, name)
            if val is not None and len(val) != m:
                raise ValueError(f"{name} has {len(val)} entries for {m} views")
        for name in ("entry_missing", "view_missing"):
            for r in getattr(self, name) or []:
                if not 0.0 <= r <= 1.0:
                    raise ValueError(f"{name} rates must be in [0, 1], got {r}")
        return self

    def view_kinds(self) -> List[str]:
        return list(self.kinds) if self.kinds else ["embedding"] * len(self.dims)

    def view_noise(self) -> List[float]:
        return list(self.noise) if self.noise else [10.0] * len(self.dims)

    def entry_rates(self) -> List[float]:
        return list(self.entry_missing) if self.entry_missing else [0.0] * len(self.dims)

    def view_rates(self) -> List[float]:
        return list(self.view_missing) if self.view_missing else [0.0] * len(self.dims)


@dataclass
class GroundTruth:
    g: np.ndarray
    z: np.ndarray
    t: np.ndarray
    v: List[np.ndarray]
    w: List[np.ndarray]
    u: np.ndarray
    vt: np.ndarray

    def arrays(self) -> dict:
        """Flat name -> array mapping (for an .npz sidecar)."""
        out = {"g": self.g, "z": self.z, "t": self.t, "u": self.u, "vt": self.vt}
        for m, (v, w) in enumerate(zip(self.v, self.w)):
            out[f"v{m}"] = v
            out[f"w{m}"] = w
        return out


@dataclass
class SyntheticData:
    dataset: MultiViewDataset
    truth: GroundTruth


def _view_names(m: int) -> List[str]:
    return [f"view{i}" for i in range(m)]


def generate_synthetic(spec: SyntheticSpec, loadings: Optional[Sequence[np.ndarray]] = None) -> SyntheticData:
    """
    Sample a fully observed, fully labeled dataset with its latent ground truth.
    `loadings` pins V^(m) (D_m x h_true each) instead of drawing it.
    """
    rng = np.random.default_rng(spec.seed)
    n, h, k, c = spec.n, spec.h_true, spec.k_true, spec.n_classes
    if loadings is not None:
        if len(loadings) != len(spec.dims):
            raise DataValidationError(f"{len(loadings)} loadings for {len(spec.dims)} views")
        v = [np.asarray(a, dtype=np.float64) for a in loadings]
        for a, dim in zip(v, spec.dims):
            if a.shape != (dim, h):
                raise DataValidationError(f"loading shape {a.shape}, expected {(dim, h)}")
    else:
        v = [rng.normal(size=(dim, h)) for dim in spec.dims]
    total_dim = float(sum(spec.dims))
    w = [rng.normal(scale=1.0 / np.sqrt(total_dim), size=(dim, k)) for dim in spec.dims]
    u = rng.normal(size=(c, k))
    vt = rng.normal(size=(c, h))

    g = rng.normal(size=(n, h))
    xs = [g @ vm.T + rng.normal(scale=1.0 / np.sqrt(p), size=(n, vm.shape[0])) for vm, p in zip(v, spec.view_noise())]
    z = sum(x @ wm for x, wm in zip(xs, w)) + rng.normal(scale=1.0 / np.sqrt(spec.tau), size=(n, k))
    t = z @ u.T + g @ vt.T + rng.normal(scale=1.0 / np.sqrt(spec.psi_t), size=(n, c))

    probs = softmax(spec.label_scale * t, axis=1)
    draws = rng.random(n)
    classes = np.minimum((probs.cumsum(axis=1) < draws[:, None]).sum(axis=1), c - 1)

    specs = tuple(
        ViewSpec(name=name, kind=kind, dim=dim)
        for name, kind, dim in zip(_view_names(len(spec.dims)), spec.view_kinds(), spec.dims)
    )
    blocks = tuple(ViewBlock(values=x, mask=np.ones(x.shape, dtype=bool)) for x in xs)
    d = MultiViewDataset(specs=specs, blocks=blocks, labels=LabelBlock.from_classes(classes, c))
    log.info("synthetic dataset generated", extra={"n": n, "dims": list(spec.dims), "h_true": h, "seed": spec.seed})
    return SyntheticData(dataset=d, truth=GroundTruth(g=g, z=z, t=t, v=v, w=w, u=u, vt=vt))


def inject_missingness(d: MultiViewDataset, spec: SyntheticSpec) -> MultiViewDataset:
    """
    MCAR masking: entries per view, then whole view rows, then labels.

    A sample left without any observed view gets one originally observed
    view restored (chosen uniformly among views with rates below 1).
    """
    entry, view = spec.entry_rates(), spec.view_rates()
    if len(entry) != d.n_views:
        raise DataValidationError(f"spec has rates for {len(entry)} views, dataset has {d.n_views}")
    eligible = np.array([e < 1.0 and r < 1.0 for e, r in zip(entry, view)])
    if not eligible.any():
        raise DataValidationError("missingness rates leave no view that can stay observed")

    rng = np.random.default_rng([spec.seed, 1])
    masks = []
    for b, e_rate, v_rate in zip(d.blocks, entry, view):
        mask = b.mask & (rng.random(b.mask.shape) >= e_rate)
        mask[rng.random(d.n) < v_rate] = False
        masks.append(mask)

    observed = np.column_stack([m.any(axis=1) for m in masks]) if d.n else np.zeros((0, d.n_views), dtype=bool)
    orig = d.view_observed()
    restored = 0
    for i in np.flatnonzero(~observed.any(axis=1)):
        choices = np.flatnonzero(orig[i] & eligible)
        if choices.size == 0:
            choices = np.flatnonzero(orig[i])
        m = int(choices[rng.integers(choices.size)])
        masks[m][i] = d.blocks[m].mask[i]
        restored += 1

    keep_label = d.labels.label_mask & (rng.random(d.n) >= spec.label_missing)
    onehot = np.where(keep_label[:, None], d.labels.onehot, 0.0)
    blocks = tuple(
        ViewBlock(values=np.where(mask, b.values, np.nan), mask=mask) for b, mask in zip(d.blocks, masks)
    )
    if restored:
        log.info("views restored to keep every sample observed", extra={"samples": restored})
    return MultiViewDataset(
        specs=d.specs, blocks=blocks, labels=LabelBlock(onehot=onehot, label_mask=keep_label), ids=d.ids
    )


# ---------------------------
# Oracles
# ---------------------------


def oracle_latent_posterior(x: np.ndarray, v: np.ndarray, psi: float) -> Tuple[np.ndarray, np.ndarray]:
    """Exact p(g | x) for x = g V^T + N(0, 1/psi) with g ~ N(0, I), by dense solves."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    v = np.atleast_2d(np.asarray(v, dtype=np.float64))
    if v.shape[0] != x.shape[0]:
        raise DataValidationError(f"V has {v.shape[0]} rows for x of length {x.shape[0]}")
    a = np.eye(v.shape[1]) + psi * v.T @ v
    try:
        cov = np.linalg.solve(a, np.eye(v.shape[1]))
        mean = np.linalg.solve(a, psi * v.T @ x)
    except np.linalg.LinAlgError as e:
        raise NumericalError("singular posterior system") from e
    if not (np.isfinite(cov).all() and np.isfinite(mean).all()):
        raise NumericalError("non-finite oracle posterior")
    return mean, cov


class SeparableSpec(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    n: PositiveInt = 200
    dims: List[PositiveInt] = Field(default_factory=lambda: [5, 5])
    separation: float = Field(6.0, ge=0.0)  # class-mean distance in noise standard deviations
    seed: NonNegativeInt = 0


def oracle_separable(spec: SeparableSpec) -> MultiViewDataset:
    """
    Two balanced Gaussian clusters per view (unit isotropic noise) whose means
    sit at +-separation/2 along a random unit direction.
    """
    rng = np.random.default_rng(spec.seed)
    classes = rng.permutation(np.arange(spec.n) % 2)
    sign = classes - 0.5
    specs, blocks = [], []
    for name, dim in zip(_view_names(len(spec.dims)), spec.dims):
        direction = rng.normal(size=dim)
        direction /= np.linalg.norm(direction)
        x = rng.normal(size=(spec.n, dim)) + spec.separation * sign[:, None] * direction
        specs.append(ViewSpec(name=name, kind="embedding", dim=dim))
        blocks.append(ViewBlock(values=x, mask=np.ones(x.shape, dtype=bool)))
    return MultiViewDataset(specs=tuple(specs), blocks=tuple(blocks), labels=LabelBlock.from_classes(classes, 2))


def bayes_optimal_bacc(separation: float) -> float:
    """Balanced accuracy of the optimal rule for one view: Phi(separation / 2)."""
    return float(norm.cdf(separation / 2.0))


__all__ = [
    "SyntheticSpec",
    "GroundTruth",
    "SyntheticData",
    "generate_synthetic",
    "inject_missingness",
    "oracle_latent_posterior",
    "SeparableSpec",
    "oracle_separable",
    "bayes_optimal_bacc",
]
