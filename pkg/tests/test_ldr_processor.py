"""Tests for frame averaging, tone-curve inversion and LDR estimates."""

import logging
import math

import numpy as np
import pytest

from data.processor import LdrProcessor, Validity
from utils.errors import DomainError
from utils.qis_simulator import ExposureSchedule, RadianceMap, simulate_stack
from utils.sensor_stats import SensorParams, pixel_stats


class TestMeanFrame:

    def test_single_frame(self):
        frame = np.array([[[0, 3], [7, 1]]], dtype=np.uint8)
        np.testing.assert_array_equal(LdrProcessor.mean_frame(frame), frame[0])

    def test_exact_average(self):
        frames = np.array([0, 1, 1, 0], dtype=np.uint8).reshape(4, 1, 1)
        assert LdrProcessor.mean_frame(frames)[0, 0] == 0.5

    def test_all_saturated(self):
        frames = np.full((300, 2, 2), 7, dtype=np.uint8)
        np.testing.assert_array_equal(LdrProcessor.mean_frame(frames), 7.0)

    def test_empty_group(self):
        with pytest.raises(DomainError):
            LdrProcessor.mean_frame(np.zeros((0, 2, 2), dtype=np.uint8))


class TestTonemapInverse:

    def test_single_bit_half(self, one_bit):
        theta, validity = LdrProcessor.tonemap_inverse(0.5, one_bit, frames=100)
        assert float(theta) == pytest.approx(math.log(2.0), rel=1e-15)
        assert int(validity) == Validity.OK

    @pytest.mark.parametrize('params', [SensorParams(1), SensorParams(7, 0.25), SensorParams(3, 0.15)])
    def test_zero_mean_is_clipped_low(self, params):
        theta, validity = LdrProcessor.tonemap_inverse(np.array([0.0]), params, frames=10)
        assert theta[0] == 0.0
        assert validity[0] == Validity.CLIPPED_LOW

    def test_multi_bit_matches_forward_table(self, three_bit):
        theta, validity = LdrProcessor.tonemap_inverse(3.2, three_bit, frames=100)
        assert int(validity) == Validity.OK
        assert pixel_stats(float(theta), three_bit).mean == pytest.approx(3.2, abs=1e-9)

        grid = np.linspace(0.0, 10.0, 100_001)
        table = np.asarray(pixel_stats(grid, three_bit).mean)
        assert float(theta) == pytest.approx(np.interp(3.2, table, grid), abs=1e-6)

    def test_full_scale_is_finite(self, one_bit):
        theta, validity = LdrProcessor.tonemap_inverse(np.array([1.0]), one_bit, frames=10)
        assert theta[0] == pytest.approx(math.log(20.0))
        assert validity[0] == Validity.CLIPPED_HIGH

    def test_saturation_cap(self, three_bit):
        theta_cap, mean_cap = LdrProcessor.saturation_cap(three_bit, 50)
        assert mean_cap >= 7 - 0.01 - 1e-12
        assert pixel_stats(theta_cap * (1 - 1e-9), three_bit).deficit > 0.01

    @pytest.mark.parametrize('level', [1, 3, 7])
    @pytest.mark.parametrize('sigma', [0.0, 0.25])
    def test_round_trip(self, level, sigma):
        params = SensorParams(level, sigma)
        theta_cap, _ = LdrProcessor.saturation_cap(params, 50)
        rng = np.random.default_rng(level * 10 + int(sigma * 100))
        theta = np.exp(rng.uniform(math.log(0.01), math.log(0.99 * theta_cap), size=1000))

        recovered, validity = LdrProcessor.tonemap_inverse(pixel_stats(theta, params).mean, params, frames=50)
        assert np.all(validity == Validity.OK)
        np.testing.assert_allclose(recovered, theta, rtol=1e-8)

    @pytest.mark.parametrize('mean', [-0.1, 7.5, np.nan])
    def test_rejects_out_of_range(self, three_bit, mean):
        with pytest.raises(DomainError):
            LdrProcessor.tonemap_inverse(mean, three_bit)


class TestLdrEstimate:

    def test_dark_single_bit(self, one_bit):
        estimate = LdrProcessor.ldr_estimate(np.zeros((10, 2, 3), dtype=np.uint8), 1e-3, one_bit)
        assert np.all(estimate.flux_estimate == 0)
        assert np.all(estimate.validity == Validity.CLIPPED_LOW)
        assert estimate.clipped_fraction == 1.0

    def test_half_mean_single_bit(self, one_bit):
        frames = np.array([0, 1] * 5, dtype=np.uint8).reshape(10, 1, 1)
        estimate = LdrProcessor.ldr_estimate(frames, 1e-3, one_bit)
        assert estimate.flux_estimate[0, 0] == pytest.approx(math.log(2.0) / 1e-3)

    def test_saturated_is_finite(self, one_bit):
        estimate = LdrProcessor.ldr_estimate(np.ones((10, 2, 2), dtype=np.uint8), 1e-3, one_bit)
        assert np.all(np.isfinite(estimate.flux_estimate))
        np.testing.assert_allclose(estimate.flux_estimate, math.log(20.0) / 1e-3)

    def test_dark_current_subtracted(self):
        params = SensorParams(1, 0.0, dark_current=100.0)
        frames = np.array([0, 1] * 5, dtype=np.uint8).reshape(10, 1, 1)
        estimate = LdrProcessor.ldr_estimate(frames, 1e-3, params)
        assert estimate.flux_estimate[0, 0] == pytest.approx(math.log(2.0) / 1e-3 - 100.0)

    def test_monte_carlo_consistency(self):
        params = SensorParams(3, 0.25)
        schedule = ExposureSchedule.from_pairs([(1e-3, 10_000)])
        stack = simulate_stack(RadianceMap.uniform(16, 16, 1e3), schedule, params, seed=21)
        estimate = LdrProcessor.ldr_stack(stack)[0]
        assert abs(estimate.flux_estimate.mean() - 1e3) / 1e3 < 0.02
        assert np.all(estimate.validity == Validity.OK)

    def test_rejects_bad_duration(self, one_bit):
        with pytest.raises(DomainError):
            LdrProcessor.ldr_estimate(np.zeros((1, 1, 1), dtype=np.uint8), 0.0, one_bit)

    def test_stack_order(self, small_stack):
        estimates = LdrProcessor.ldr_stack(small_stack)
        assert [e.duration for e in estimates] == [1e-3, 1e-4, 1e-5]
        assert all(e.flux_estimate.shape == (6, 8) for e in estimates)

    def test_saturation_warning_reports_clipped_share(self, one_bit, caplog):
        frames = np.zeros((10, 2, 2), dtype=np.uint8)
        frames[:, 0, :] = 1
        with caplog.at_level(logging.WARNING, logger='data.processor'):
            estimate = LdrProcessor.ldr_estimate(frames, 1e-3, one_bit)
        assert estimate.clipped_fraction == 1.0
        assert '2 pixels saturated' in caplog.text
        assert '100.0% clipped in total' in caplog.text


class TestTonemapRoundTripProperty:

    def test_random_sensors(self):
        rng = np.random.default_rng(2718)
        cases = 0
        for _ in range(20):
            level = int(rng.choice([1, 3, 7, 15]))
            sigma = 0.0 if rng.random() < 0.25 else float(rng.uniform(0.05, 0.4))
            frames = int(rng.integers(1, 201))
            params = SensorParams(level, sigma)
            theta_cap, _ = LdrProcessor.saturation_cap(params, frames)
            theta = np.exp(rng.uniform(math.log(0.01), math.log(0.99 * theta_cap), size=50))

            recovered, validity = LdrProcessor.tonemap_inverse(pixel_stats(theta, params).mean, params, frames)
            assert np.all(validity == Validity.OK)
            np.testing.assert_allclose(recovered, theta, rtol=1e-8, err_msg=f"L={level} σ={sigma} K={frames}")
            cases += theta.size
        assert cases == 1000
