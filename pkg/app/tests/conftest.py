from typing import Callable, List, Optional, Sequence

import numpy as np
import pytest

from bionic.dataset import LabelBlock, MultiViewDataset, ViewBlock, ViewSpec
from bionic.inference import fit
from bionic.model import Hyperparams
from bionic.synthetic import SeparableSpec, SyntheticSpec, generate_synthetic, oracle_separable

FAST_HYPER = Hyperparams(h_init=6, max_sweeps=60, conv_window=10, conv_tol=1e-7, prune_every=20, seed=3)


def build_dataset(
    values: Sequence[np.ndarray],
    classes: Sequence[int],
    kinds: Optional[Sequence[str]] = None,
    n_classes: int = 2,
    masks: Optional[Sequence[np.ndarray]] = None,
) -> MultiViewDataset:
    """NaN marks a missing entry unless explicit masks are given."""
    kinds = list(kinds) if kinds else ["embedding"] * len(values)
    specs: List[ViewSpec] = []
    blocks: List[ViewBlock] = []
    for i, (x, kind) in enumerate(zip(values, kinds)):
        x = np.asarray(x, dtype=np.float64)
        mask = np.isfinite(x) if masks is None else np.asarray(masks[i], dtype=bool)
        specs.append(ViewSpec(name=f"v{i}", kind=kind, dim=x.shape[1]))
        blocks.append(ViewBlock(values=x, mask=mask))
    return MultiViewDataset(specs=tuple(specs), blocks=tuple(blocks), labels=LabelBlock.from_classes(classes, n_classes))


@pytest.fixture
def make_dataset() -> Callable[..., MultiViewDataset]:
    return build_dataset


@pytest.fixture
def fast_hyper() -> Hyperparams:
    return FAST_HYPER


@pytest.fixture(scope="session")
def synth():
    return generate_synthetic(SyntheticSpec(n=80, dims=[6, 5], h_true=3, seed=11))


@pytest.fixture(scope="session")
def fitted(synth):
    """Model fitted once per session on the synthetic dataset; treat as read-only."""
    return fit(synth.dataset, FAST_HYPER, regime="s")


@pytest.fixture(scope="session")
def separable() -> MultiViewDataset:
    return oracle_separable(SeparableSpec(n=100, dims=[4, 4], separation=6.0, seed=5))
