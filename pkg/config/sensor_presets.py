"""
Named sensor, CIS and exposure-schedule presets.
Lets the command line start from a known configuration and override single values.
"""

import logging
from typing import Dict, List, Optional

from utils.cis_model import CisParams
from utils.errors import DomainError
from utils.qis_simulator import ExposureSchedule
from utils.sensor_stats import SensorParams

logger = logging.getLogger(__name__)

# Sub-electron read noise and dark current of a photon-counting jot
JOT_READ_NOISE = 0.25
JOT_DARK_CURRENT = 0.0068


class SensorPresets:
    """
    Preset registry for sensors and bracketing schedules.
    Every preset can be customized before it is turned into parameters.
    """

    TEMPLATES = {
        'qis_1bit': {'clip_level': 1, 'read_noise': JOT_READ_NOISE, 'dark_current': JOT_DARK_CURRENT},
        'qis_2bit': {'clip_level': 3, 'read_noise': JOT_READ_NOISE, 'dark_current': JOT_DARK_CURRENT},
        'qis_3bit': {'clip_level': 7, 'read_noise': JOT_READ_NOISE, 'dark_current': JOT_DARK_CURRENT},
        'qis_4bit': {'clip_level': 15, 'read_noise': JOT_READ_NOISE, 'dark_current': JOT_DARK_CURRENT},
    }

    CIS_TEMPLATES = {
        'cis_default': {'full_well': 4000, 'read_noise': 2.0},
    }

    SCHEDULES = {
        'real_experiment': {'exposures': '75us:10,375us:10,1875us:10'},
        'decade_4': {'exposures': '100ms:1000,10ms:1000,1ms:1000,100us:1000'},
        'ramp_demo': {'exposures': '1ms:100,100us:100,10us:100'},
    }

    @classmethod
    def _lookup(cls, registry: Dict[str, dict], name: str, kind: str) -> dict:
        if name not in registry:
            raise DomainError(f"unknown {kind} preset '{name}', available: {', '.join(sorted(registry))}")
        return dict(registry[name])

    @classmethod
    def customize(cls, name: str, **overrides) -> dict:
        """
        Preset values with selected fields replaced.

        Args:
            name: str - Name from TEMPLATES, CIS_TEMPLATES or SCHEDULES
            **overrides: Field values to replace; None leaves the preset value

        Returns:
            dict - Resolved values
        """
        for registry in (cls.TEMPLATES, cls.CIS_TEMPLATES, cls.SCHEDULES):
            if name in registry:
                values = dict(registry[name])
                break
        else:
            raise DomainError(f"unknown preset '{name}'")

        for key, value in overrides.items():
            if value is None:
                continue
            if key not in values:
                raise DomainError(f"preset '{name}' has no field '{key}'")
            values[key] = value
        return values

    @classmethod
    def get_sensor(cls, name: str = 'qis_1bit', **overrides) -> SensorParams:
        cls._lookup(cls.TEMPLATES, name, 'sensor')
        values = cls.customize(name, **overrides)
        logger.debug(f"Sensor preset {name}: {values}")
        return SensorParams(**values)

    @classmethod
    def get_cis(cls, name: str = 'cis_default', **overrides) -> CisParams:
        cls._lookup(cls.CIS_TEMPLATES, name, 'CIS')
        return CisParams(**cls.customize(name, **overrides))

    @classmethod
    def get_schedule(cls, name: str, frame_period: Optional[float] = None) -> ExposureSchedule:
        preset = cls._lookup(cls.SCHEDULES, name, 'schedule')
        return ExposureSchedule.parse(preset['exposures'], frame_period)

    @classmethod
    def list_presets(cls) -> Dict[str, List[str]]:
        return {
            'sensor': sorted(cls.TEMPLATES),
            'cis': sorted(cls.CIS_TEMPLATES),
            'schedule': sorted(cls.SCHEDULES),
        }
