"""
Monte Carlo forward model of a quanta image sensor.

Radiance (photons/s) is integrated over each exposure, photon arrivals are
Poisson, the readout adds Gaussian read noise, and the ADC rounds and clips
the analog value to [0, L]. Every frame draws from its own counter-based
Philox stream keyed by (seed, group, frame), so stacks are bit-identical
regardless of how many worker threads produce them.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from data.validators import DataValidator
from utils.errors import DomainError, ScheduleError
from utils.sensor_stats import SensorParams

logger = logging.getLogger(__name__)

MAX_SEED = 2 ** 64 - 1


@dataclass(frozen=True, eq=False)
class RadianceMap:
    """
    Static scene radiance.

    Args:
        flux: np.ndarray - Per-pixel photon flux λ (photons/second), shape (height, width)
    """

    flux: np.ndarray

    def __post_init__(self):
        flux = np.array(self.flux, dtype=np.float64)
        if flux.ndim != 2 or min(flux.shape) < 1:
            raise DomainError(f"radiance map must be a non-empty 2-D array, got shape {flux.shape}")
        if not np.all(np.isfinite(flux)):
            raise DomainError("radiance map contains non-finite flux values")
        if np.any(flux < 0):
            raise DomainError("radiance map contains negative flux values")
        flux.setflags(write=False)
        object.__setattr__(self, 'flux', flux)

    @property
    def height(self) -> int:
        return self.flux.shape[0]

    @property
    def width(self) -> int:
        return self.flux.shape[1]

    @classmethod
    def uniform(cls, width: int, height: int, flux: float) -> 'RadianceMap':
        """Constant scene at one flux level."""
        return cls(np.full((height, width), float(flux)))

    @classmethod
    def ramp(cls, width: int, height: int, low: float, high: float) -> 'RadianceMap':
        """
        Horizontal ramp whose flux grows geometrically from `low` to `high`.

        A 12-decade test scene is ramp(w, h, 1e-2, 1e10).
        """
        if not (0 < low < high):
            raise DomainError(f"ramp bounds must satisfy 0 < low < high, got {low}, {high}")
        row = np.logspace(math.log10(low), math.log10(high), int(width))
        return cls(np.broadcast_to(row, (int(height), int(width))))


@dataclass(frozen=True)
class ExposureGroup:
    duration: float
    frames: int


@dataclass(frozen=True)
class ExposureSchedule:
    """
    Bracketing plan: M exposure groups plus the frame period T.

    Args:
        groups: tuple - ExposureGroup per exposure, in acquisition order
        frame_period: float - T in seconds; every duration must fit inside it
    """

    groups: Tuple[ExposureGroup, ...]
    frame_period: float

    def __post_init__(self):
        groups = tuple(
            group if isinstance(group, ExposureGroup) else ExposureGroup(float(group[0]), group[1])
            for group in self.groups
        )
        pairs = [(float(g.duration), g.frames) for g in groups]
        is_valid, error, warnings = DataValidator.validate_schedule(pairs, float(self.frame_period))
        if not is_valid:
            raise ScheduleError(error)
        for warning in warnings:
            logger.warning(f"⚠ {warning}")

        object.__setattr__(self, 'groups', tuple(ExposureGroup(d, int(k)) for d, k in pairs))
        object.__setattr__(self, 'frame_period', float(self.frame_period))

    @classmethod
    def from_pairs(cls, pairs: Sequence[Tuple[float, int]],
                   frame_period: Optional[float] = None) -> 'ExposureSchedule':
        """Build from (duration, frames) pairs; T defaults to the longest duration."""
        pairs = list(pairs)
        if not pairs:
            raise ScheduleError("Schedule needs at least one exposure group")
        if frame_period is None:
            frame_period = max(float(duration) for duration, _ in pairs)
        return cls(tuple(ExposureGroup(float(d), k) for d, k in pairs), frame_period)

    @classmethod
    def parse(cls, text: str, frame_period: Optional[float] = None) -> 'ExposureSchedule':
        """Parse '75us:10,375us:10,1875us:10'."""
        return cls.from_pairs(DataValidator.parse_schedule(text), frame_period)

    @property
    def num_groups(self) -> int:
        return len(self.groups)

    @property
    def total_frames(self) -> int:
        return sum(group.frames for group in self.groups)

    @property
    def durations(self) -> np.ndarray:
        return np.array([group.duration for group in self.groups])

    @property
    def frame_counts(self) -> np.ndarray:
        return np.array([group.frames for group in self.groups], dtype=np.int64)

    def shortest_index(self) -> int:
        return int(np.argmin(self.durations))

    def to_dict(self) -> Dict[str, Any]:
        return {
            'schedule': [[group.duration, group.frames] for group in self.groups],
            'frame_period': self.frame_period,
        }


def code_dtype(clip_level: int) -> np.dtype:
    """Smallest unsigned container for codes 0..L."""
    if clip_level <= 255:
        return np.dtype(np.uint8)
    if clip_level <= 65535:
        return np.dtype('<u2')
    raise DomainError(f"clip level {clip_level} does not fit in 16-bit codes")


@dataclass(eq=False)
class FrameStack:
    """
    Digitized frames grouped by exposure.

    Args:
        schedule: ExposureSchedule - Acquisition plan
        params: SensorParams - Jot physics used to produce the codes
        seed: int - Root seed of the random streams
        frames: list - One (K_m, height, width) code array per group
        extra_header: dict - Container header keys this version does not interpret
    """

    schedule: ExposureSchedule
    params: SensorParams
    seed: int
    frames: List[np.ndarray]
    extra_header: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if len(self.frames) != self.schedule.num_groups:
            raise DomainError(
                f"stack holds {len(self.frames)} groups but the schedule has {self.schedule.num_groups}"
            )
        shapes = {group.shape[1:] for group in self.frames}
        if len(shapes) != 1:
            raise DomainError(f"frame groups disagree on frame size: {sorted(shapes)}")
        for index, (group, spec) in enumerate(zip(self.frames, self.schedule.groups)):
            if group.ndim != 3 or group.shape[0] != spec.frames:
                raise DomainError(
                    f"group {index} holds {group.shape[0] if group.ndim == 3 else '?'} frames, "
                    f"schedule expects {spec.frames}"
                )

    @property
    def height(self) -> int:
        return self.frames[0].shape[1]

    @property
    def width(self) -> int:
        return self.frames[0].shape[2]

    @property
    def num_groups(self) -> int:
        return len(self.frames)

    def group_means(self) -> List[float]:
        return [float(group.mean()) for group in self.frames]


def frame_stream(seed: int, group: int, frame: int) -> np.random.Generator:
    """Independent Philox stream for one frame of one exposure group."""
    if isinstance(seed, bool) or int(seed) != seed or not 0 <= seed <= MAX_SEED:
        raise DomainError(f"seed must be an integer in [0, 2^64), got {seed!r}")
    sequence = np.random.SeedSequence(int(seed), spawn_key=(int(group), int(frame)))
    return np.random.Generator(np.random.Philox(sequence))


def integrate_flux(radiance: RadianceMap, duration: float, dark_current: float = 0.0) -> np.ndarray:
    """
    Per-pixel Poisson mean θ = λ·Δ + μ_dark·Δ for a static scene.

    Args:
        radiance: RadianceMap - Scene flux
        duration: float - Exposure Δ in seconds
        dark_current: float - μ_dark in electrons/second

    Returns:
        np.ndarray - θ map, same shape as the scene
    """
    if not math.isfinite(duration) or duration <= 0:
        raise DomainError(f"exposure duration must be positive, got {duration}")
    if not math.isfinite(dark_current) or dark_current < 0:
        raise DomainError(f"dark current must be non-negative, got {dark_current}")
    return radiance.flux * duration + dark_current * duration


def simulate_frame(theta_map: np.ndarray, params: SensorParams,
                   stream: np.random.Generator) -> np.ndarray:
    """
    Draw one digitized frame.

    Photon counts are Poisson(θ), the analog value adds N(0, σ_read²), and
    the code is round-then-clip into [0, L] (single-bit included).

    Args:
        theta_map: np.ndarray - Poisson means, finite and >= 0
        params: SensorParams - Jot physics
        stream: np.random.Generator - Frame stream (see frame_stream)

    Returns:
        np.ndarray - Codes with dtype code_dtype(L), same shape as theta_map
    """
    theta_map = np.asarray(theta_map, dtype=np.float64)
    if not np.all(np.isfinite(theta_map)) or np.any(theta_map < 0):
        raise DomainError("θ map must be finite and non-negative")

    counts = stream.poisson(theta_map)
    if params.read_noise > 0:
        analog = counts + stream.normal(0.0, params.read_noise, size=theta_map.shape)
        codes = np.rint(analog)
    else:
        codes = counts
    return np.clip(codes, 0, params.clip_level).astype(code_dtype(params.clip_level))


def simulate_stack(radiance: RadianceMap, schedule: ExposureSchedule, params: SensorParams,
                   seed: int, workers: int = 1) -> FrameStack:
    """
    Simulate every frame of a bracketing schedule.

    Args:
        radiance: RadianceMap - Scene flux
        schedule: ExposureSchedule - Groups (Δ_m, K_m)
        params: SensorParams - Jot physics
        seed: int - Root seed
        workers: int - Threads used to draw frames; output does not depend on it

    Returns:
        FrameStack
    """
    frame_stream(seed, 0, 0)
    dtype = code_dtype(params.clip_level)
    groups = []

    with ThreadPoolExecutor(max_workers=max(1, int(workers))) as pool:
        for index, group in enumerate(schedule.groups):
            theta = integrate_flux(radiance, group.duration, params.dark_current)
            codes = np.empty((group.frames, radiance.height, radiance.width), dtype=dtype)

            def draw(frame: int, m: int = index, theta_map: np.ndarray = theta, out: np.ndarray = codes):
                out[frame] = simulate_frame(theta_map, params, frame_stream(seed, m, frame))

            list(pool.map(draw, range(group.frames)))
            groups.append(codes)
            logger.info(
                f"✓ Simulated group {index + 1}: {group.frames} frames at {group.duration:g}s, "
                f"mean code {codes.mean():.4g}"
            )

    return FrameStack(schedule=schedule, params=params, seed=int(seed), frames=groups)


def sample_pixel_codes(theta: float, params: SensorParams, count: int, seed: int) -> np.ndarray:
    """`count` independent codes of a single jot at Poisson mean θ."""
    if int(count) < 1:
        raise DomainError(f"sample count must be positive, got {count}")
    return simulate_frame(np.full(int(count), float(theta)), params, frame_stream(seed, 0, 0))


def simulate_photon_counting_readings(theta: float, read_noise: float, count: int, seed: int,
                                      lsb: Optional[float] = 0.05) -> np.ndarray:
    """
    Repeated analog readings Z = K + η_read of one pixel.

    Args:
        theta: float - Poisson mean per reading
        read_noise: float - σ_read in electrons
        count: int - Number of readings
        seed: int - Root seed
        lsb: float - Readout quantization step in electrons; None keeps Z unquantized

    Returns:
        np.ndarray - float64 readings in electrons
    """
    if not math.isfinite(theta) or theta < 0:
        raise DomainError(f"θ must be finite and non-negative, got {theta}")
    if not math.isfinite(read_noise) or read_noise < 0:
        raise DomainError(f"read noise must be non-negative, got {read_noise}")
    if int(count) < 1:
        raise DomainError(f"reading count must be positive, got {count}")

    stream = frame_stream(seed, 0, 0)
    readings = stream.poisson(theta, size=int(count)) + stream.normal(0.0, read_noise, size=int(count))
    if lsb is not None:
        if lsb <= 0:
            raise DomainError(f"readout LSB must be positive, got {lsb}")
        readings = np.round(readings / lsb) * lsb
    return readings


def effective_frames(frames: int, oversampling: int = 1) -> int:
    """
    Frame count after s×s spatial oversampling, K·s².

    Treats the s² jots of a binned pixel as extra temporal samples, which is
    exact only for locally constant flux.
    """
    if isinstance(oversampling, bool) or int(oversampling) != oversampling or oversampling < 1:
        raise DomainError(f"oversampling factor must be a positive integer, got {oversampling}")
    if int(frames) != frames or frames < 1:
        raise DomainError(f"frame count must be a positive integer, got {frames}")
    return int(frames) * int(oversampling) ** 2
