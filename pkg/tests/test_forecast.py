"""
Forecast tests

Tests cover:
- AR(2) fits on exact, noisy, scaled, degenerate and short histories
- Rolling load history and its refit schedule
- Flow prediction and the overflow check
"""
import numpy as np
from django.test import SimpleTestCase
from hypothesis import assume, given, settings, strategies as st
from scipy import signal

from gridflow.forecast import (
    LoadHistory, OverflowFlags, check_overflow, fit_ar2, fit_ar2_batch,
    predict_line_flows, predict_load_delta,
)
from gridflow.grid import build_matrices, ptdf
from .base import three_bus_case


def ar2_series(phi1, phi2, x0, x1, n):
    x = [x0, x1]
    for _ in range(n - 2):
        x.append(phi1 * x[-1] + phi2 * x[-2])
    return np.array(x)


class Ar2FitTestCase(SimpleTestCase):

    @settings(max_examples=50, deadline=None)
    @given(
        st.integers(-9, 9).map(lambda k: k / 10.0),
        st.integers(-9, 9).map(lambda k: k / 20.0),
        st.integers(1, 9).map(float),
    )
    def test_recovers_exact_coefficients(self, phi1, phi2, x1):
        series = ar2_series(phi1, phi2, 1.0, x1, 12)
        singular = np.linalg.svd(np.column_stack((series[1:-1], series[:-2])), compute_uv=False)
        assume(singular[-1] > 1e-6 * singular[0])
        np.testing.assert_allclose(fit_ar2(series), (phi1, phi2), atol=1e-8)

    def test_noiseless_reference_process(self):
        series = ar2_series(0.5, 0.3, 1.0, -1.0, 30)
        np.testing.assert_allclose(fit_ar2(series), (0.5, 0.3), atol=1e-8)

    def test_recovers_coefficients_under_noise(self):
        rng = np.random.default_rng(16)
        series = signal.lfilter([1.0], [1.0, -0.5, -0.3], 1e-3 * rng.standard_normal(20000))
        np.testing.assert_allclose(fit_ar2(series), (0.5, 0.3), atol=0.05)

    def test_invariant_to_scaling(self):
        rng = np.random.default_rng(4)
        series = signal.lfilter([1.0], [1.0, -1.1, 0.3], rng.standard_normal(200))
        fitted = fit_ar2(series)
        for scale in (1e-4, -3.0, 250.0):
            np.testing.assert_allclose(fit_ar2(scale * series), fitted, atol=1e-10)
        np.testing.assert_allclose(fit_ar2(np.full(10, -40.0)), fit_ar2(np.full(10, 0.3)), atol=1e-12)

    def test_zero_history(self):
        self.assertEqual(fit_ar2(np.zeros(10)), (0.0, 0.0))

    def test_constant_history_is_minimum_norm(self):
        np.testing.assert_allclose(fit_ar2(np.full(10, 0.3)), (0.5, 0.5))

    def test_short_history(self):
        self.assertEqual(fit_ar2([1.0, 2.0]), (0.0, 0.0))

    def test_batch_matches_single(self):
        series = np.array([ar2_series(0.5, 0.2, 1.0, 2.0, 20), ar2_series(-0.3, 0.1, 0.5, 1.0, 20), np.zeros(20)])
        batch = fit_ar2_batch(series)
        for row, fitted in zip(series, batch):
            np.testing.assert_allclose(fitted, fit_ar2(row), atol=1e-9)

    def test_prediction(self):
        self.assertAlmostEqual(float(predict_load_delta((0.5, 0.25), 2.0, 4.0)), 2.0)
        np.testing.assert_allclose(
            predict_load_delta(np.array([[1.0, 0.0], [0.0, 1.0]]), np.array([1.0, 2.0]), np.array([3.0, 4.0])),
            [1.0, 4.0],
        )


class LoadHistoryTestCase(SimpleTestCase):

    def test_persistence_until_three_samples(self):
        history = LoadHistory(2)
        np.testing.assert_array_equal(history.predict(), [0.0, 0.0])
        history.push([0.1, -0.2])
        np.testing.assert_allclose(history.predict(), [0.1, -0.2])

    def test_first_fit_after_three_samples(self):
        history = LoadHistory(1, window=50, refit_every=10)
        for value in ar2_series(0.5, 0.3, 1.0, 1.0, 3):
            history.push([value])
        self.assertNotEqual(history.phi[0, 0], 0.0)

    def test_window_is_bounded(self):
        history = LoadHistory(1, window=5)
        for k in range(20):
            history.push([float(k)])
        self.assertEqual(len(history), 5)
        self.assertEqual(list(history.samples[0]), [15.0, 16.0, 17.0, 18.0, 19.0])

    def test_tracks_ar_process(self):
        series = ar2_series(1.2, -0.5, 1.0, 1.5, 40)
        history = LoadHistory(1, window=50, refit_every=10)
        for value in series[:-1]:
            history.push([value])
        history.refit()
        np.testing.assert_allclose(history.predict(), [series[-1]], atol=1e-6)


class FlowPredictionTestCase(SimpleTestCase):

    def setUp(self):
        self.matrices = build_matrices(three_bus_case())

    def test_prediction_is_linear_in_increments(self):
        m = self.matrices
        flows = ptdf(m) @ np.array([1.5, 0.5, -2.0])
        predicted = predict_line_flows(flows, np.array([0.1, 0.0]), np.array([-0.1]), m.hflow, m.tg, m.tl)
        expected = ptdf(m) @ np.array([1.6, 0.5, -2.1])
        np.testing.assert_allclose(predicted, expected, atol=1e-12)

    def test_overflow_threshold_is_inclusive(self):
        flags = check_overflow(np.array([1.0, -1.2, 0.5]), np.array([1.0, 1.0, 1.0]))
        np.testing.assert_array_equal(flags.flags, [True, True, False])
        np.testing.assert_array_equal(flags.sign, [1.0, -1.0, 0.0])

    def test_activation_factor(self):
        flags = check_overflow(np.array([0.95]), np.array([1.0]), activation=0.9)
        self.assertTrue(flags.any)

    def test_union_prefers_own_sign(self):
        first = OverflowFlags(flags=np.array([True, False]), sign=np.array([1.0, 0.0]))
        second = OverflowFlags(flags=np.array([True, True]), sign=np.array([-1.0, -1.0]))
        merged = first.union(second)
        np.testing.assert_array_equal(merged.flags, [True, True])
        np.testing.assert_array_equal(merged.sign, [1.0, -1.0])
