"""Shared fixtures for the test suite."""

import numpy as np
import pytest

from utils.qis_simulator import ExposureSchedule, RadianceMap, simulate_stack
from utils.sensor_stats import SensorParams


@pytest.fixture
def one_bit():
    return SensorParams(clip_level=1, read_noise=0.0, dark_current=0.0)


@pytest.fixture
def three_bit():
    return SensorParams(clip_level=7, read_noise=0.25, dark_current=0.0)


@pytest.fixture
def rng():
    return np.random.default_rng(42)


@pytest.fixture
def small_stack(three_bit):
    """A 3-exposure stack of an 8x6 ramp, 20 frames per exposure."""
    schedule = ExposureSchedule.from_pairs([(1e-3, 20), (1e-4, 20), (1e-5, 20)])
    radiance = RadianceMap.ramp(8, 6, 1e2, 1e6)
    return simulate_stack(radiance, schedule, three_bit, seed=1234)
