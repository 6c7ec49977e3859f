"""Tests for schedule, grid and code validation."""

import numpy as np
import pytest

from data.validators import DataValidator
from utils.errors import DomainError, ScheduleError


class TestParseDuration:

    @pytest.mark.parametrize('text, seconds', [
        ('75us', 75e-6), ('1.875ms', 1.875e-3), ('0.1', 0.1), ('1e-4s', 1e-4), ('20 ns', 20e-9), ('3µs', 3e-6),
    ])
    def test_units(self, text, seconds):
        assert DataValidator.parse_duration(text) == pytest.approx(seconds)

    @pytest.mark.parametrize('text', ['', 'fast', '10min', '0', '-1ms'])
    def test_rejects(self, text):
        with pytest.raises(ScheduleError):
            DataValidator.parse_duration(text)


class TestParseSchedule:

    def test_pairs(self):
        groups = DataValidator.parse_schedule('75us:10, 375us:10,1875us:10')
        assert [frames for _, frames in groups] == [10, 10, 10]
        assert groups[2][0] == pytest.approx(1.875e-3)

    @pytest.mark.parametrize('text', ['', '1ms', '1ms:2:3', '1ms:two'])
    def test_rejects(self, text):
        with pytest.raises(ScheduleError):
            DataValidator.parse_schedule(text)

    def test_schedule_error_is_a_domain_error(self):
        assert issubclass(ScheduleError, DomainError)


class TestValidateSchedule:

    def test_valid(self):
        is_valid, error, warnings = DataValidator.validate_schedule([(1e-3, 10), (1e-4, 10)], 1e-3)
        assert is_valid and error is None and warnings == []

    def test_exposure_longer_than_period(self):
        is_valid, error, _ = DataValidator.validate_schedule([(2e-3, 1)], 1e-3)
        assert not is_valid
        assert 'exceeds the frame period' in error

    @pytest.mark.parametrize('groups', [[], [(1e-3, 0)], [(0.0, 1)], [(1e-3, 1.5)]])
    def test_invalid_groups(self, groups):
        assert not DataValidator.validate_schedule(groups, 1.0)[0]

    def test_warnings(self):
        _, _, warnings = DataValidator.validate_schedule([(1e-3, 60_000), (1e-3, 60_000)], 1e-3)
        assert len(warnings) == 2


class TestGrids:

    def test_parse_grid(self):
        assert DataValidator.parse_grid('0.1:1e5:3073') == (0.1, 1e5, 3073)

    @pytest.mark.parametrize('text', ['1:10', '10:1:5', '0:1:5', '1:10:1', 'a:b:c'])
    def test_parse_grid_rejects(self, text):
        with pytest.raises(DomainError):
            DataValidator.parse_grid(text)

    @pytest.mark.parametrize('values, message', [
        ([1.0], 'at least 2'),
        ([1.0, np.inf], 'finite'),
        ([0.0, 1.0], 'positive'),
        ([1.0, 1.0], 'increasing'),
    ])
    def test_validate_grid(self, values, message):
        is_valid, error = DataValidator.validate_grid(np.array(values))
        assert not is_valid
        assert message in error

    def test_validate_grid_accepts(self):
        assert DataValidator.validate_grid(np.geomspace(1, 10, 5)) == (True, None)


class TestLocateInvalidCode:

    def test_none_when_clean(self):
        assert DataValidator.locate_invalid_code(np.zeros((3, 4), dtype=np.uint8), 1) is None

    def test_first_violation(self):
        codes = np.zeros((3, 4), dtype=np.uint8)
        codes[2, 1] = 9
        codes[1, 3] = 8
        assert DataValidator.locate_invalid_code(codes, 7) == (1, 3)
