"""Tests for the Monte Carlo forward model."""

import numpy as np
import pytest
from scipy import stats

from utils.errors import DomainError, ScheduleError
from utils.qis_simulator import (ExposureSchedule, FrameStack, RadianceMap, code_dtype, effective_frames,
                                 frame_stream, integrate_flux, sample_pixel_codes, simulate_frame,
                                 simulate_photon_counting_readings, simulate_stack)
from utils.sensor_stats import SensorParams, pixel_stats


class TestRadianceMap:

    def test_uniform(self):
        scene = RadianceMap.uniform(5, 3, 42.0)
        assert (scene.height, scene.width) == (3, 5)
        assert np.all(scene.flux == 42.0)

    def test_ramp_spans_decades(self):
        scene = RadianceMap.ramp(13, 2, 1e-2, 1e10)
        np.testing.assert_allclose(scene.flux[0, [0, -1]], [1e-2, 1e10], rtol=1e-12)
        np.testing.assert_allclose(np.diff(np.log10(scene.flux[1])), 1.0, rtol=1e-9)

    def test_flux_is_read_only(self):
        scene = RadianceMap.uniform(2, 2, 1.0)
        with pytest.raises(ValueError):
            scene.flux[0, 0] = 5.0

    @pytest.mark.parametrize('flux', [np.array([[-1.0]]), np.array([[np.inf]]), np.zeros((0, 3)), np.zeros(4)])
    def test_rejects_invalid(self, flux):
        with pytest.raises(DomainError):
            RadianceMap(flux)


class TestExposureSchedule:

    def test_parse_real_experiment(self):
        schedule = ExposureSchedule.parse('75us:10,375us:10,1875us:10')
        np.testing.assert_allclose(schedule.durations, [75e-6, 375e-6, 1875e-6])
        assert schedule.total_frames == 30
        assert schedule.frame_period == pytest.approx(1875e-6)
        assert schedule.shortest_index() == 0

    def test_duration_longer_than_period(self):
        with pytest.raises(ScheduleError):
            ExposureSchedule.from_pairs([(1e-3, 10)], frame_period=1e-4)

    def test_empty(self):
        with pytest.raises(ScheduleError):
            ExposureSchedule.from_pairs([])

    def test_to_dict(self):
        schedule = ExposureSchedule.from_pairs([(1e-3, 2), (1e-4, 3)], frame_period=2e-3)
        assert schedule.to_dict() == {'schedule': [[1e-3, 2], [1e-4, 3]], 'frame_period': 2e-3}


class TestIntegrateFlux:

    def test_dark_scene(self):
        assert np.all(integrate_flux(RadianceMap.uniform(3, 3, 0.0), 1e-3) == 0)

    def test_product(self):
        theta = integrate_flux(RadianceMap.uniform(2, 2, 1e4), 1e-3)
        np.testing.assert_allclose(theta, 10.0)

    def test_dark_current(self):
        theta = integrate_flux(RadianceMap.uniform(1, 1, 1e4), 1.0, 0.0068)
        np.testing.assert_allclose(theta, 10000.0068, rtol=1e-15)

    def test_rejects_non_positive_duration(self):
        with pytest.raises(DomainError):
            integrate_flux(RadianceMap.uniform(1, 1, 1.0), 0.0)


class TestSimulateFrame:

    def test_dark_noiseless_frame_is_zero(self, one_bit):
        frame = simulate_frame(np.zeros((4, 4)), one_bit, frame_stream(1, 0, 0))
        assert frame.dtype == np.uint8
        assert not frame.any()

    def test_mean_matches_analytic(self):
        params = SensorParams(7, 0.0)
        frame = simulate_frame(np.full(1_000_000, 3.0), params, frame_stream(7, 0, 0))
        moments = pixel_stats(3.0, params)
        assert abs(frame.mean() - moments.mean) <= 4 * np.sqrt(moments.variance / frame.size)

    def test_codes_bounded(self, three_bit):
        theta = np.geomspace(1e-3, 1e3, 10_000)
        frame = simulate_frame(theta, three_bit, frame_stream(3, 1, 2))
        assert frame.min() >= 0 and frame.max() <= 7

    def test_analog_histogram_follows_density(self):
        readings = simulate_photon_counting_readings(1.48, 0.25, 100_000, seed=11, lsb=None)
        edges = np.arange(-1.0, 9.0 + 1e-9, 0.25)

        levels = np.arange(0, 40)
        weights = stats.poisson.pmf(levels, 1.48)
        cdf = stats.norm.cdf((edges[:, None] - levels) / 0.25) @ weights
        expected = np.diff(cdf) * readings.size
        observed, _ = np.histogram(readings, bins=edges)

        keep = expected >= 5
        observed, expected = observed[keep], expected[keep]
        expected *= observed.sum() / expected.sum()
        assert stats.chisquare(observed, expected).pvalue > 0.01

    def test_readings_are_quantized(self):
        readings = simulate_photon_counting_readings(1.48, 0.25, 1000, seed=3)
        np.testing.assert_allclose(readings / 0.05, np.round(readings / 0.05), atol=1e-9)


class TestSimulateStack:

    def test_dark_single_frame(self, one_bit):
        schedule = ExposureSchedule.from_pairs([(1e-3, 1)])
        stack = simulate_stack(RadianceMap.uniform(4, 3, 0.0), schedule, one_bit, seed=0)
        assert stack.num_groups == 1
        assert stack.frames[0].shape == (1, 3, 4)
        assert not stack.frames[0].any()

    def test_real_experiment_geometry(self, three_bit):
        schedule = ExposureSchedule.parse('75us:10,375us:10,1875us:10')
        stack = simulate_stack(RadianceMap.ramp(16, 4, 1e2, 1e5), schedule, three_bit, seed=5)
        assert [group.shape[0] for group in stack.frames] == [10, 10, 10]
        assert all(group.max() <= 7 for group in stack.frames)
        means = stack.group_means()
        assert means[0] < means[1] < means[2]

    def test_deterministic_across_workers(self, three_bit):
        schedule = ExposureSchedule.from_pairs([(1e-3, 6), (1e-4, 6)])
        scene = RadianceMap.ramp(10, 5, 1e2, 1e5)
        serial = simulate_stack(scene, schedule, three_bit, seed=99, workers=1)
        threaded = simulate_stack(scene, schedule, three_bit, seed=99, workers=4)
        for a, b in zip(serial.frames, threaded.frames):
            np.testing.assert_array_equal(a, b)

    @pytest.mark.parametrize('seed', [0, 7, 2 ** 40 + 3, 2 ** 64 - 1])
    def test_random_scene_identical_for_any_worker_count(self, seed):
        rng = np.random.default_rng(seed % 1000)
        scene = RadianceMap(10 ** rng.uniform(1, 6, size=(25, 40)))
        params = SensorParams(int(rng.choice([1, 3, 7, 15])), float(rng.uniform(0, 0.5)), float(rng.uniform(0, 5)))
        schedule = ExposureSchedule.from_pairs([(1e-3, 3), (1e-4, 2), (1e-5, 2)])

        reference = simulate_stack(scene, schedule, params, seed=seed, workers=1)
        for workers in (2, 3, 8):
            stack = simulate_stack(scene, schedule, params, seed=seed, workers=workers)
            for a, b in zip(reference.frames, stack.frames):
                np.testing.assert_array_equal(a, b)

    def test_seed_changes_frames(self, three_bit):
        schedule = ExposureSchedule.from_pairs([(1e-3, 4)])
        scene = RadianceMap.uniform(16, 16, 2e3)
        first = simulate_stack(scene, schedule, three_bit, seed=1)
        second = simulate_stack(scene, schedule, three_bit, seed=2)
        assert not np.array_equal(first.frames[0], second.frames[0])

    def test_mean_increases_with_light(self, one_bit):
        schedule = ExposureSchedule.from_pairs([(1e-3, 1)])
        means = [simulate_stack(RadianceMap.uniform(1000, 100, flux), schedule, one_bit, seed=8).frames[0].mean()
                 for flux in np.geomspace(1e2, 1e5, 8)]
        assert np.all(np.diff(means) >= 0)

    def test_rejects_bad_seed(self, one_bit):
        schedule = ExposureSchedule.from_pairs([(1e-3, 1)])
        with pytest.raises(DomainError):
            simulate_stack(RadianceMap.uniform(2, 2, 1.0), schedule, one_bit, seed=-1)


class TestFrameStack:

    def test_group_count_mismatch(self, one_bit):
        schedule = ExposureSchedule.from_pairs([(1e-3, 1), (1e-4, 1)])
        with pytest.raises(DomainError):
            FrameStack(schedule, one_bit, 0, [np.zeros((1, 2, 2), dtype=np.uint8)])

    def test_frame_count_mismatch(self, one_bit):
        schedule = ExposureSchedule.from_pairs([(1e-3, 3)])
        with pytest.raises(DomainError):
            FrameStack(schedule, one_bit, 0, [np.zeros((2, 2, 2), dtype=np.uint8)])


class TestHelpers:

    def test_frame_stream_is_keyed(self):
        a = frame_stream(5, 1, 2).random(4)
        b = frame_stream(5, 1, 2).random(4)
        c = frame_stream(5, 2, 1).random(4)
        np.testing.assert_array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_code_dtype(self):
        assert code_dtype(1) == np.uint8
        assert code_dtype(255) == np.uint8
        assert code_dtype(1023) == np.dtype('<u2')
        with pytest.raises(DomainError):
            code_dtype(70000)

    def test_effective_frames(self):
        assert effective_frames(1000, 2) == 4000
        assert effective_frames(10) == 10
        with pytest.raises(DomainError):
            effective_frames(10, 0)

    def test_sample_pixel_codes(self, three_bit):
        codes = sample_pixel_codes(2.0, three_bit, 500, seed=4)
        assert codes.shape == (500,)
        np.testing.assert_array_equal(codes, sample_pixel_codes(2.0, three_bit, 500, seed=4))
