import numpy as np
import pytest

from bionic.dataset import MultiViewDataset, ViewBlock
from bionic.errors import DataValidationError
from bionic.impute import VARIANCE_FLOOR, impute_dataset, reconstruct_moments, reconstruct_view
from bionic.inference import fit


def _drop_entries(d, view, rows):
    b = d.blocks[view]
    mask = b.mask.copy()
    mask[rows] = False
    blocks = list(d.blocks)
    blocks[view] = ViewBlock(values=np.where(mask, b.values, np.nan), mask=mask)
    return MultiViewDataset(specs=d.specs, blocks=tuple(blocks), labels=d.labels, ids=d.ids)


def test_imputation_keeps_observed_entries(fitted, synth):
    d = _drop_entries(synth.dataset, 1, [0, 3, 7])
    out = impute_dataset(fitted, d)
    filled = out.dataset
    assert all(b.mask.all() for b in filled.blocks)
    for raw, new in zip(d.blocks, filled.blocks):
        np.testing.assert_array_equal(new.values[raw.mask], raw.values[raw.mask])
        assert np.isfinite(new.values).all()
    assert filled.ids == d.ids
    assert [v.shape for v in out.variances] == [b.values.shape for b in d.blocks]


def test_reconstruction_variance_exceeds_noise(fitted):
    for m in range(fitted.n_views):
        r = reconstruct_moments(fitted, fitted.qg, m)
        assert r.mean.shape == (fitted.qg.n, fitted.kept_dims()[m])
        assert np.all(r.var >= 1.0 / float(fitted.noise[m].mean))
        assert np.all(r.raw_var >= -1e-12)


def test_cohort_and_embedded_reconstructions_share_shapes(fitted, synth):
    cohort = reconstruct_view(fitted, 2, 0)
    embedded = reconstruct_view(fitted, 2, 0, d=synth.dataset)
    assert cohort.raw_mean.shape == embedded.raw_mean.shape == (synth.dataset.specs[0].dim,)
    assert cohort.mean.shape == (fitted.kept_dims()[0],)


def test_reconstruct_view_rejects_bad_indices(fitted):
    with pytest.raises(DataValidationError):
        reconstruct_view(fitted, 0, fitted.n_views)
    with pytest.raises(DataValidationError):
        reconstruct_view(fitted, fitted.qg.n, 0)


def test_variances_stay_positive_outside_the_kept_subspace(make_dataset, fast_hyper):
    rng = np.random.default_rng(5)
    g = rng.normal(size=(60, 2))
    emb = np.column_stack([
        g @ [1.0, 0.5] + 1e-3 * rng.normal(size=60),
        g @ [-0.3, 1.2] + 1e-3 * rng.normal(size=60),
        1e-4 * rng.normal(size=60),  # falls below the rotation cut
        np.full(60, 2.0),  # constant: zero training spread
    ])
    clin = g @ rng.normal(size=(2, 3)) + 0.1 * rng.normal(size=(60, 3))
    d = make_dataset([emb, clin], [0, 1] * 30, kinds=["embedding", "structured"])
    s = fit(d, fast_hyper, regime="s")
    vp = s.preprocess.view(0)
    assert vp.kept < 4
    assert vp.dropped_variance()[2] > 0.0

    out = impute_dataset(s, d)
    assert np.all(out.variances[0] > 0.0)
    assert np.all(out.variances[0][:, 2] >= vp.dropped_variance()[2])
    assert np.all(out.variances[0][:, 3] >= VARIANCE_FLOOR)
