import numpy as np
import pytest
from scipy.special import expit

from bionic.classify import (
    discriminative_logits,
    labels_from_proba,
    moderated_probability,
    predict_labels,
    predict_logits,
    predict_proba,
    proba_from_moments,
)


def test_moderation_shrinks_towards_one_half():
    mean = np.array([2.0, -3.0, 0.0])
    np.testing.assert_allclose(moderated_probability(mean, np.zeros(3)), expit(mean))
    wide = moderated_probability(mean, np.full(3, 50.0))
    assert np.all(np.abs(wide - 0.5) < np.abs(expit(mean) - 0.5) + 1e-15)
    kappa = 1.0 / np.sqrt(1.0 + np.pi * 4.0 / 8.0)
    assert moderated_probability(np.array([1.0]), np.array([4.0]))[0] == pytest.approx(expit(kappa))


def test_binary_outputs_sum_to_one():
    p = proba_from_moments(np.array([[0.3, 1.2], [-2.0, -2.0]]), np.ones((2, 2)))
    np.testing.assert_allclose(p.sum(axis=1), 1.0)
    assert p[1, 0] == pytest.approx(0.5)


def test_multiclass_outputs_are_not_renormalized():
    mean = np.array([[0.0, 0.0, 0.0]])
    p = proba_from_moments(mean, np.zeros((1, 3)))
    np.testing.assert_allclose(p, [[0.5, 0.5, 0.5]])


def test_ties_go_to_the_lower_class():
    assert labels_from_proba(np.array([[0.5, 0.5], [0.2, 0.8], [0.4, 0.4]])).tolist() == [0, 1, 0]


def test_predictions_on_the_fitted_cohort(fitted, synth):
    d = synth.dataset
    mean, var = predict_logits(fitted, d)
    assert mean.shape == var.shape == (d.n, 2)
    assert np.all(var >= 1.0 / float(fitted.psi_t.mean))
    p = predict_proba(fitted, d)
    assert np.all((p >= 0) & (p <= 1))
    np.testing.assert_allclose(p.sum(axis=1), 1.0)
    assert predict_labels(fitted, d).tolist() == np.argmax(p, axis=1).tolist()


def test_prediction_tolerates_a_missing_view(fitted, synth):
    from bionic.dataset import MultiViewDataset, ViewBlock

    d = synth.dataset
    b = d.blocks[1]
    mask = b.mask.copy()
    mask[:5] = False
    values = np.where(mask, b.values, np.nan)
    partial = MultiViewDataset(
        specs=d.specs, blocks=(d.blocks[0], ViewBlock(values=values, mask=mask)), labels=d.labels, ids=d.ids
    )
    p = predict_proba(fitted, partial)
    assert np.isfinite(p).all()
    np.testing.assert_allclose(p[5:], predict_proba(fitted, d)[5:])


def test_discriminative_logits_are_linear_in_inputs(fitted, synth):
    from bionic.dataset import subset

    d = subset(synth.dataset, [0, 1])
    z = discriminative_logits(fitted, d)
    assert z.shape == (2, 2)
    assert np.isfinite(z).all()
