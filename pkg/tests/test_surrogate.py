"""Gaussian-process surrogate: interpolation, invariances and updates."""

import numpy as np
import pytest

from s4is.surrogate import (CompositeMinSurrogate, GpSurrogate,
                            SupportPointSet, fit_surrogate, training_inputs)


def _training_data(n=20, d=2, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.uniform(-3, 3, size=(n, d))
    y = x[:, 0] ** 2 - x[:, 1] + np.sin(x.sum(axis=1))
    return x, y


def test_interpolates_training_points():
    x, y = _training_data()
    model = GpSurrogate().fit(x, y)
    mean, sd = model.predict(x)
    np.testing.assert_allclose(mean, y, atol=1e-4)
    assert np.all(sd < 1e-3)


def test_output_shift_invariance():
    x, y = _training_data()
    grid = np.random.default_rng(1).uniform(-3, 3, size=(30, 2))
    base = GpSurrogate().fit(x, y).predict_mean(grid)
    shifted = GpSurrogate().fit(x, y + 100.0).predict_mean(grid)
    np.testing.assert_allclose(shifted, base + 100.0, atol=1e-3)


def test_predictive_sd_grows_away_from_data():
    x, y = _training_data()
    model = GpSurrogate().fit(x, y)
    sd_near = model.predict_sd(x[:1] + 1e-3)
    sd_far = model.predict_sd(np.array([[30.0, -30.0]]))
    assert sd_far[0] > sd_near[0]


def test_optimizer_history_is_monotone_best_so_far():
    x, y = _training_data()
    model = GpSurrogate().fit(x, y)
    hist = np.asarray(model.nll_history)
    assert len(hist) >= 1
    assert np.all(np.diff(hist) <= 1e-12)


def test_constant_outputs_degenerate_fit():
    x = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    model = GpSurrogate().fit(x, np.full(3, 7.0))
    mean, sd = model.predict(np.array([[5.0, 5.0]]))
    assert mean[0] == pytest.approx(7.0)
    assert sd[0] == pytest.approx(0.0, abs=1e-12)


def test_duplicate_inputs_rejected():
    x = np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 1.0]])
    with pytest.raises(ValueError):
        GpSurrogate().fit(x, np.array([1.0, 1.0, 2.0]))


def test_update_matches_fresh_fit():
    x, y = _training_data(15)
    rng = np.random.default_rng(3)
    x_new = rng.uniform(-3, 3, size=(1, 2))
    y_new = x_new[:, 0] ** 2 - x_new[:, 1] + np.sin(x_new.sum(axis=1))

    fresh = GpSurrogate().fit(np.vstack([x, x_new]), np.append(y, y_new))
    updated = GpSurrogate().fit(x, y)
    updated = updated.update(x_new, x_new, y_new)

    grid = rng.uniform(-3, 3, size=(20, 2))
    np.testing.assert_allclose(updated.predict_mean(grid),
                               fresh.predict_mean(grid), atol=1e-8)


def test_composite_min_of_component_means():
    rng = np.random.default_rng(5)
    x = rng.uniform(-3, 3, size=(25, 2))
    comp = np.column_stack([x[:, 0] + 2.0, -x[:, 0] + 2.0])
    model = CompositeMinSurrogate.fit(x, comp)
    grid = np.array([[2.0, 0.0], [-2.0, 0.0], [0.0, 0.0]])
    mean = model.predict_mean(grid)
    np.testing.assert_allclose(mean, [0.0, 0.0, 2.0], atol=1e-3)
    # sd comes from the argmin component, so it is positive where data thins
    assert np.all(model.predict_sd(np.array([[10.0, 10.0]])) > 0)


def test_support_point_set_append_and_duplicates():
    pts = SupportPointSet(np.zeros((1, 2)), np.zeros((1, 2)), np.array([1.0]),
                          np.array([[1.0, 2.0]]))
    pts.append(np.array([1.0, 1.0]), np.array([1.0, 1.0]), 0.5,
               np.array([0.5, 0.7]))
    assert len(pts) == 2
    with pytest.raises(ValueError):
        pts.append(np.array([1.0, 1.0]), np.array([1.0, 1.0]), 0.5,
                   np.array([0.5, 0.7]))


def test_fit_surrogate_feature_map():
    pts = SupportPointSet(np.empty((0, 1)), np.empty((0, 1)), np.empty(0),
                          np.empty((0, 1)))
    for v in np.linspace(-2, 2, 8):
        pts.append(np.array([v]), np.array([2.0 * v + 1.0]),
                   float(v ** 2), np.array([v ** 2]))
    feat = lambda theta: (np.atleast_2d(theta) - 1.0) / 2.0
    model = fit_surrogate(pts, composite=False, feature_fn=feat)
    np.testing.assert_allclose(training_inputs(pts, feat), pts.inputs_u,
                               atol=1e-12)
    pred = model.predict_mean(feat(pts.inputs_theta))
    np.testing.assert_allclose(pred, pts.outputs, atol=1e-3)
