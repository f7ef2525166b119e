import numpy as np
import pytest
from pydantic import ValidationError
from scipy.special import digamma

from bionic.errors import DataValidationError
from bionic.evaluation import DEFAULT_FOLDS
from bionic.model import (
    ColumnGaussianMatrix,
    GammaPosterior,
    Hyperparams,
    PerSampleGaussian,
    RowGaussianMatrix,
    init_model,
)
from bionic.preprocess import apply_preprocess, fit_preprocess


def test_hyperparams_defaults():
    h = Hyperparams()
    assert h.h_init == 100
    assert h.a0 == h.b0 == 1e-14
    assert h.noise_shape == h.noise_rate == 1e-14
    assert h.max_sweeps == 5000 and h.conv_window == 100
    assert h.conv_tol == 1e-8
    assert h.prune_tol == 1e-6
    assert h.variance_threshold == 0.999
    assert h.k is None
    assert h.resolved_k(2) == 1 and h.resolved_k(5) == 4
    assert DEFAULT_FOLDS == 10


@pytest.mark.parametrize(
    "kwargs",
    [
        {"h_init": 0},
        {"a0": 0.0},
        {"variance_threshold": 1.5},
        {"conv_window": 10, "max_sweeps": 10},
        {"seed": 2**64},
        {"unknown": 1},
    ],
)
def test_hyperparams_reject_bad_values(kwargs):
    with pytest.raises(ValidationError):
        Hyperparams(**kwargs)


def test_k_above_class_bound():
    with pytest.raises(DataValidationError, match="exceeds"):
        Hyperparams(k=3).resolved_k(3)


def test_gamma_moments_and_kl():
    g = GammaPosterior(np.array([2.0, 5.0]), np.array([4.0, 0.5]))
    np.testing.assert_allclose(g.mean, [0.5, 10.0])
    np.testing.assert_allclose(g.log_mean, digamma([2.0, 5.0]) - np.log([4.0, 0.5]))
    assert GammaPosterior.prior(1.0, 2.0, size=3).kl(1.0, 2.0) == pytest.approx(0.0, abs=1e-12)
    assert g.kl(1.0, 1.0) > 0.0
    assert g.select(np.array([1])).mean.tolist() == [10.0]


def test_per_sample_gaussian_moments():
    mean = np.array([[1.0, 0.0], [0.0, 2.0], [1.0, 1.0]])
    cov = np.stack([np.eye(2), 2.0 * np.eye(2)])
    q = PerSampleGaussian(mean, cov, np.array([0, 1, 0]))
    expected = sum(np.outer(m, m) for m in mean) + 2 * np.eye(2) + 2.0 * np.eye(2)
    np.testing.assert_allclose(q.second_moment_sum(), expected)
    w = np.array([[1.0, 0.0, 1.0], [0.0, 1.0, 0.0]])
    stats = q.weighted_second_moments(w)
    np.testing.assert_allclose(stats[0], np.outer(mean[0], mean[0]) + np.outer(mean[2], mean[2]) + 2 * np.eye(2))
    np.testing.assert_allclose(stats[1], np.outer(mean[1], mean[1]) + 2.0 * np.eye(2))
    np.testing.assert_allclose(q.marginal_var(), [[1, 1], [2, 2], [1, 1]])
    assert q.take(np.array([1])).sample_cov()[0].tolist() == (2.0 * np.eye(2)).tolist()


def test_row_and_column_matrices():
    q = RowGaussianMatrix.shared(np.array([[1.0, 2.0], [3.0, 4.0]]), 0.5 * np.eye(2))
    np.testing.assert_allclose(q.column_energy(), [1 + 9 + 1, 4 + 16 + 1])
    np.testing.assert_allclose(q.gram(), np.array([[10.0, 14.0], [14.0, 20.0]]) + np.eye(2))
    w = ColumnGaussianMatrix(np.array([[1.0], [2.0]]), np.eye(2)[None] * 0.25)
    np.testing.assert_allclose(w.column_energy(), [5.5])
    np.testing.assert_allclose(w.row_quadratic(np.array([[2.0, 0.0]])), [[1.0]])


def test_init_is_a_function_of_data_and_seed(synth, fast_hyper):
    d = synth.dataset
    p = fit_preprocess(d, fast_hyper.variance_threshold)
    d_pre = apply_preprocess(p, d)
    a = init_model(d_pre, p, fast_hyper)
    b = init_model(d_pre, p, fast_hyper)
    c = init_model(d_pre, p, fast_hyper.model_copy(update={"seed": fast_hyper.seed + 1}))
    for x, y in zip(a.qv, b.qv):
        np.testing.assert_array_equal(x.mean, y.mean)
    np.testing.assert_array_equal(a.qg.mean, b.qg.mean)
    assert not np.array_equal(a.qv[0].mean, c.qv[0].mean)
    assert a.active_h == fast_hyper.h_init
    assert a.qt.mean[d.labels.label_mask].tolist() == (2 * d.labels.onehot[d.labels.label_mask] - 1).tolist()
    assert np.all(a.xi == 1.0)
    assert abs(np.std(a.qv[0].mean) - 0.1) < 0.05


def test_init_rejects_unpreprocessed_data(synth, fast_hyper):
    d = synth.dataset
    p = fit_preprocess(d, 0.5)
    if [vp.kept for vp in p.per_view] == [s.dim for s in d.specs]:
        pytest.skip("threshold kept every component")
    with pytest.raises(DataValidationError, match="do not match"):
        init_model(d, p, fast_hyper)
