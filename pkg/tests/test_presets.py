"""Tests for sensor, CIS and schedule presets."""

import pytest

from config.sensor_presets import JOT_READ_NOISE, SensorPresets
from utils.errors import DomainError


class TestSensorPresets:

    @pytest.mark.parametrize('name, level', [('qis_1bit', 1), ('qis_2bit', 3), ('qis_3bit', 7), ('qis_4bit', 15)])
    def test_bit_depths(self, name, level):
        params = SensorPresets.get_sensor(name)
        assert params.clip_level == level
        assert params.read_noise == JOT_READ_NOISE

    def test_override(self):
        params = SensorPresets.get_sensor('qis_1bit', read_noise=0.15, dark_current=None)
        assert params.read_noise == 0.15
        assert params.dark_current == SensorPresets.TEMPLATES['qis_1bit']['dark_current']

    def test_templates_are_not_mutated(self):
        SensorPresets.customize('qis_3bit', clip_level=31)
        assert SensorPresets.TEMPLATES['qis_3bit']['clip_level'] == 7

    def test_unknown_field(self):
        with pytest.raises(DomainError, match='no field'):
            SensorPresets.customize('qis_1bit', gain=2.0)

    def test_unknown_preset(self):
        with pytest.raises(DomainError, match='available'):
            SensorPresets.get_sensor('spad')

    def test_kind_is_checked(self):
        with pytest.raises(DomainError):
            SensorPresets.get_sensor('cis_default')


class TestCisAndSchedules:

    def test_cis_default(self):
        cis = SensorPresets.get_cis()
        assert (cis.full_well, cis.read_noise) == (4000, 2.0)

    def test_real_experiment_schedule(self):
        schedule = SensorPresets.get_schedule('real_experiment')
        assert [g.frames for g in schedule.groups] == [10, 10, 10]
        assert schedule.durations.tolist() == pytest.approx([75e-6, 375e-6, 1875e-6])
        assert schedule.frame_period == pytest.approx(1875e-6)

    def test_decade_schedule(self):
        schedule = SensorPresets.get_schedule('decade_4', frame_period=0.2)
        assert schedule.total_frames == 4000
        assert schedule.frame_period == 0.2

    def test_listing(self):
        listing = SensorPresets.list_presets()
        assert 'qis_1bit' in listing['sensor']
        assert listing['cis'] == ['cis_default']
        assert 'decade_4' in listing['schedule']
