"""
Validation and parsing of user-supplied acquisition parameters.
Ensures schedules, grids and frame payloads are well formed before they reach the engines.
"""

import math
import re
from typing import List, Optional, Sequence, Tuple

import numpy as np

from utils.errors import DomainError, ScheduleError


class DataValidator:
    """Validates exposure schedules, flux grids and frame payloads"""

    # Duration suffixes accepted in schedules ("75us:10")
    SI_UNITS = {
        's': 1.0,
        'ms': 1e-3,
        'us': 1e-6,
        'µs': 1e-6,
        'μs': 1e-6,
        'ns': 1e-9,
    }

    # Schedules beyond this many frames are legal but worth a warning
    LARGE_STACK_FRAMES = 100_000

    _DURATION_PATTERN = re.compile(
        r'^\s*([0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?)\s*(s|ms|us|µs|μs|ns)?\s*$'
    )

    @classmethod
    def parse_duration(cls, text: str) -> float:
        """
        Parse a duration with an optional SI suffix.

        Args:
            text: str - e.g. '75us', '1.875ms', '0.1', '1e-4s'

        Returns:
            float - Seconds
        """
        match = cls._DURATION_PATTERN.match(str(text))
        if not match:
            raise ScheduleError(f"Cannot parse duration '{text}'")
        value = float(match.group(1)) * cls.SI_UNITS[match.group(2) or 's']
        if not math.isfinite(value) or value <= 0:
            raise ScheduleError(f"Duration must be positive, got '{text}'")
        return value

    @classmethod
    def parse_schedule(cls, text: str) -> List[Tuple[float, int]]:
        """
        Parse an exposure schedule written as 'Δ1:K1,Δ2:K2,...'.

        Args:
            text: str - Comma-separated 'duration:frames' items

        Returns:
            list - (duration seconds, frame count) per exposure group
        """
        items = [item.strip() for item in str(text).split(',') if item.strip()]
        if not items:
            raise ScheduleError("Exposure schedule is empty")

        groups = []
        for position, item in enumerate(items, start=1):
            parts = item.split(':')
            if len(parts) != 2:
                raise ScheduleError(f"Exposure {position} '{item}' is not of the form duration:frames")
            duration = cls.parse_duration(parts[0])
            try:
                frames = int(parts[1])
            except ValueError:
                raise ScheduleError(f"Exposure {position} has a non-integer frame count '{parts[1]}'")
            groups.append((duration, frames))

        return groups

    @classmethod
    def parse_grid(cls, text: str) -> Tuple[float, float, int]:
        """
        Parse a log-spaced grid written as 'lo:hi:n'.

        Returns:
            tuple: (low, high, points)
        """
        parts = str(text).split(':')
        if len(parts) != 3:
            raise DomainError(f"Grid '{text}' is not of the form lo:hi:n")
        try:
            low, high, points = float(parts[0]), float(parts[1]), int(parts[2])
        except ValueError:
            raise DomainError(f"Grid '{text}' has non-numeric fields")

        if not (0 < low < high) or not math.isfinite(high):
            raise DomainError(f"Grid bounds must satisfy 0 < lo < hi, got {low}, {high}")
        if points < 2:
            raise DomainError(f"Grid needs at least 2 points, got {points}")
        return low, high, points

    @classmethod
    def validate_schedule(cls, groups: Sequence[Tuple[float, int]], frame_period: float):
        """
        Validate exposure groups against the frame period.

        Args:
            groups: sequence - (duration, frames) pairs
            frame_period: float - Frame period T in seconds

        Returns:
            tuple: (is_valid: bool, error_message: str or None, warnings: list)
        """
        if len(groups) == 0:
            return False, "Schedule needs at least one exposure group", []

        if not math.isfinite(frame_period) or frame_period <= 0:
            return False, f"Frame period must be positive, got {frame_period}", []

        for index, (duration, frames) in enumerate(groups, start=1):
            if not math.isfinite(duration) or duration <= 0:
                return False, f"Exposure {index}: duration must be positive, got {duration}", []
            if isinstance(frames, bool) or int(frames) != frames or frames < 1:
                return False, f"Exposure {index}: frame count must be a positive integer, got {frames}", []
            if duration > frame_period:
                return False, (f"Exposure {index}: duration {duration:g}s exceeds the frame "
                               f"period {frame_period:g}s"), []

        warnings = []
        total = sum(int(frames) for _, frames in groups)
        if total > cls.LARGE_STACK_FRAMES:
            warnings.append(f"Schedule holds {total} frames; simulation memory grows with every frame")

        durations = [duration for duration, _ in groups]
        if len(set(durations)) != len(durations):
            warnings.append("Several exposure groups share the same duration")

        return True, None, warnings

    @classmethod
    def validate_grid(cls, values: np.ndarray):
        """
        Validate an abscissa grid (positive, strictly increasing, >= 2 points).

        Returns:
            tuple: (is_valid: bool, error_message: str or None)
        """
        values = np.asarray(values, dtype=np.float64)
        if values.ndim != 1 or values.size < 2:
            return False, "Grid needs at least 2 points"
        if not np.all(np.isfinite(values)):
            return False, "Grid values must be finite"
        if values[0] <= 0:
            return False, "Grid values must be positive"
        if np.any(np.diff(values) <= 0):
            return False, "Grid must be strictly increasing"
        return True, None

    @classmethod
    def locate_invalid_code(cls, codes: np.ndarray, clip_level: int) -> Optional[Tuple[int, int]]:
        """
        Find the first ADC code above the clip level.

        Args:
            codes: np.ndarray - Frames shaped (frames, pixels)
            clip_level: int - Largest legal code L

        Returns:
            tuple or None: (frame index, row-major pixel index) of the first violation
        """
        bad = np.flatnonzero(codes.reshape(-1) > clip_level)
        if bad.size == 0:
            return None
        first = int(bad[0])
        pixels = codes.shape[1]
        return first // pixels, first % pixels
