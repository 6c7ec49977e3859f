"""
Low-dynamic-range estimation from grouped QIS frames.
Averages each exposure group, inverts the sensor tone curve and rescales to flux.
"""

import logging
import math
from dataclasses import dataclass
from enum import IntEnum
from functools import lru_cache
from typing import List, Sequence, Tuple, Union

import numpy as np

from utils.errors import DomainError, NumericalError
from utils.sensor_stats import SensorParams, pixel_stats

logger = logging.getLogger(__name__)


class Validity(IntEnum):
    """Per-pixel status of an LDR estimate"""
    OK = 0
    CLIPPED_LOW = 1
    CLIPPED_HIGH = 2


@dataclass(frozen=True, eq=False)
class LdrEstimate:
    """
    Flux estimate S[m] of one exposure group.

    Args:
        duration: float - Δ_m in seconds
        frames: int - K_m
        flux_estimate: np.ndarray - S[m] in photons/second, finite and >= 0
        validity: np.ndarray - Validity code per pixel
        theta_estimate: np.ndarray - Per-frame Poisson mean θ̂ before dark subtraction
    """

    duration: float
    frames: int
    flux_estimate: np.ndarray
    validity: np.ndarray
    theta_estimate: np.ndarray

    @property
    def clipped_fraction(self) -> float:
        return float(np.mean(self.validity != Validity.OK))


class LdrProcessor:
    """Turns frame groups into per-exposure flux estimates"""

    MAX_BISECTIONS = 200
    RELATIVE_WIDTH = 1e-14

    @staticmethod
    def mean_frame(frames: Union[np.ndarray, Sequence[np.ndarray]]) -> np.ndarray:
        """
        Exact per-pixel average of K frames.

        Args:
            frames: np.ndarray - Codes shaped (K, height, width), or a list of frames

        Returns:
            np.ndarray - float64 mean in [0, L]
        """
        stack = np.asarray(frames)
        if stack.ndim < 1 or stack.shape[0] == 0:
            raise DomainError("cannot average an empty frame group")
        return stack.sum(axis=0, dtype=np.int64) / stack.shape[0]

    @staticmethod
    @lru_cache(maxsize=64)
    def saturation_cap(params: SensorParams, frames: int = 1) -> Tuple[float, float]:
        """
        Largest invertible Poisson mean for a K-frame average.

        θ_cap is the smallest θ with μ_Y(θ) >= L - 1/(2K).

        Returns:
            tuple: (θ_cap, μ_Y(θ_cap))
        """
        target = 0.5 / frames
        if params.is_single_bit and params.read_noise == 0:
            theta_cap = math.log(2.0 * frames)
            return theta_cap, -math.expm1(-theta_cap)

        low, high = 0.0, float(params.clip_level)
        while pixel_stats(high, params).deficit > target:
            low, high = high, 2.0 * high
            if high > 1e12:
                raise NumericalError(f"no saturation cap found for {params}")

        for _ in range(LdrProcessor.MAX_BISECTIONS):
            middle = 0.5 * (low + high)
            if pixel_stats(middle, params).deficit > target:
                low = middle
            else:
                high = middle
            if high - low <= LdrProcessor.RELATIVE_WIDTH * high:
                break

        return high, float(pixel_stats(high, params).mean)

    @staticmethod
    def _bisect_response(targets: np.ndarray, params: SensorParams, upper: float) -> np.ndarray:
        low = np.zeros_like(targets)
        high = np.full_like(targets, upper)
        for _ in range(LdrProcessor.MAX_BISECTIONS):
            middle = 0.5 * (low + high)
            above = np.asarray(pixel_stats(middle, params).mean) >= targets
            high = np.where(above, middle, high)
            low = np.where(above, low, middle)
            if np.all(high - low <= LdrProcessor.RELATIVE_WIDTH * high):
                break
        return 0.5 * (low + high)

    @staticmethod
    def tonemap_inverse(mean: Union[float, np.ndarray], params: SensorParams,
                        frames: int = 1) -> Tuple[np.ndarray, np.ndarray]:
        """
        Invert the tone curve f: θ̂ = f⁻¹(mean).

        Single-bit noiseless jots use θ̂ = -ln(1 - mean); every other sensor
        bisects μ_Y(θ̂) = mean on [0, θ_cap]. Means at or below μ_Y(0) give
        θ̂ = 0 (clipped-low); means above μ_Y(θ_cap) clamp to θ_cap (clipped-high).

        Args:
            mean: float or np.ndarray - Frame averages in [0, L]
            params: SensorParams - Jot physics
            frames: int - K, sets the saturation clamp 1/(2K)

        Returns:
            tuple: (θ̂ array, Validity array)
        """
        values = np.asarray(mean, dtype=np.float64)
        if not np.all(np.isfinite(values)) or np.any(values < 0) or np.any(values > params.clip_level):
            raise DomainError(f"frame means must lie in [0, {params.clip_level}]")
        if isinstance(frames, bool) or int(frames) != frames or frames < 1:
            raise DomainError(f"frame count must be a positive integer, got {frames!r}")

        theta_cap, mean_cap = LdrProcessor.saturation_cap(params, int(frames))
        floor = float(pixel_stats(0.0, params).mean)

        low = values <= floor
        high = values > mean_cap
        validity = np.full(values.shape, Validity.OK, dtype=np.uint8)
        validity[low] = Validity.CLIPPED_LOW
        validity[high] = Validity.CLIPPED_HIGH

        theta = np.zeros(values.shape)
        theta[high] = theta_cap
        inside = ~(low | high)

        if np.any(inside):
            if params.is_single_bit and params.read_noise == 0:
                theta[inside] = -np.log1p(-values[inside])
            else:
                levels, inverse = np.unique(values[inside], return_inverse=True)
                theta[inside] = LdrProcessor._bisect_response(levels, params, theta_cap)[inverse.ravel()]

        return theta, validity

    @staticmethod
    def ldr_estimate(frames: np.ndarray, duration: float, params: SensorParams) -> LdrEstimate:
        """
        S[m] = max(f⁻¹(mean)/Δ_m - μ_dark, 0) for one exposure group.

        Args:
            frames: np.ndarray - Codes shaped (K, height, width)
            duration: float - Δ_m in seconds
            params: SensorParams

        Returns:
            LdrEstimate
        """
        if not math.isfinite(duration) or duration <= 0:
            raise DomainError(f"exposure duration must be positive, got {duration}")

        frames = np.asarray(frames)
        count = frames.shape[0] if frames.ndim else 0
        average = LdrProcessor.mean_frame(frames)
        theta, validity = LdrProcessor.tonemap_inverse(average, params, count)
        flux = np.maximum(theta / duration - params.dark_current, 0.0)

        estimate = LdrEstimate(
            duration=float(duration),
            frames=int(count),
            flux_estimate=flux,
            validity=validity,
            theta_estimate=theta,
        )

        clipped_high = int(np.count_nonzero(validity == Validity.CLIPPED_HIGH))
        if clipped_high:
            logger.warning(f"⚠ {clipped_high} pixels saturated at Δ={duration:g}s "
                           f"({estimate.clipped_fraction:.1%} clipped in total)")
        return estimate

    @classmethod
    def ldr_stack(cls, stack) -> List[LdrEstimate]:
        """LDR estimate for every exposure group of a FrameStack, in schedule order."""
        estimates = [
            cls.ldr_estimate(codes, group.duration, stack.params)
            for codes, group in zip(stack.frames, stack.schedule.groups)
        ]
        logger.info(f"✓ Built {len(estimates)} LDR estimates ({stack.width}x{stack.height})")
        return estimates
