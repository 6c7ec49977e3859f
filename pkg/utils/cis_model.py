"""
Linear-response CMOS image sensor baseline.

A CIS pixel is linear up to its full-well capacity L and hard-clips above it.
Below saturation its noise is shot noise plus read noise; at or above L the
exposure-referred noise is infinite.
"""

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from utils.errors import DomainError

ArrayLike = Union[float, np.ndarray]


@dataclass(frozen=True)
class CisParams:
    """
    Args:
        full_well: int - Full-well capacity L in electrons
        read_noise: float - σ_read in electrons
    """

    full_well: int = 4000
    read_noise: float = 2.0

    def __post_init__(self):
        if isinstance(self.full_well, bool) or int(self.full_well) != self.full_well or self.full_well < 1:
            raise DomainError(f"full well must be an integer >= 1, got {self.full_well!r}")
        if not math.isfinite(self.read_noise) or self.read_noise < 0:
            raise DomainError(f"read noise must be finite and non-negative, got {self.read_noise}")
        object.__setattr__(self, 'full_well', int(self.full_well))
        object.__setattr__(self, 'read_noise', float(self.read_noise))

    def to_dict(self):
        return {'full_well': self.full_well, 'read_noise': self.read_noise}


@dataclass(frozen=True, eq=False)
class CisWeights:
    """
    Exposure weights of the CIS rule.

    Args:
        weights: np.ndarray - Shape (M, ...) summing to one along axis 0
        saturated: np.ndarray - True where every exposure saturates
    """

    weights: np.ndarray
    saturated: np.ndarray


def _unwrap(values):
    return float(values) if np.ndim(values) == 0 else values


def _positive_theta(theta: ArrayLike) -> np.ndarray:
    values = np.asarray(theta, dtype=np.float64)
    if not np.all(np.isfinite(values)) or np.any(values <= 0):
        raise DomainError("CIS SNR needs θ > 0")
    return values


def _check_frames(frames: int) -> int:
    if isinstance(frames, bool) or int(frames) != frames or frames < 1:
        raise DomainError(f"frame count must be a positive integer, got {frames!r}")
    return int(frames)


def cis_mean(theta: ArrayLike, params: CisParams) -> ArrayLike:
    """Expected CIS output min(θ, L)."""
    values = np.asarray(theta, dtype=np.float64)
    if np.any(values < 0):
        raise DomainError("θ must be non-negative")
    return _unwrap(np.minimum(values, params.full_well))


def cis_response_curve(theta: ArrayLike, params: CisParams) -> ArrayLike:
    return cis_mean(theta, params)


def cis_exposure_referred_noise(theta: ArrayLike, params: CisParams, frames: int = 1) -> ArrayLike:
    """√K·√(θ + σ_read²) below full well, +∞ at or above it."""
    frames = _check_frames(frames)
    values = _positive_theta(theta)
    noise = math.sqrt(frames) * np.sqrt(values + params.read_noise ** 2)
    return _unwrap(np.where(values >= params.full_well, np.inf, noise))


def cis_snr_h(theta: ArrayLike, params: CisParams, frames: int = 1) -> ArrayLike:
    """
    Exposure-referred SNR of K summed CIS frames in dB.

    Args:
        theta: float or np.ndarray - Electrons per frame, > 0
        params: CisParams
        frames: int - K

    Returns:
        20·log10(√K·θ/√(θ + σ_read²)) below L; -∞ for θ >= L
    """
    frames = _check_frames(frames)
    values = _positive_theta(theta)
    snr = 20.0 * np.log10(math.sqrt(frames) * values / np.sqrt(values + params.read_noise ** 2))
    return _unwrap(np.where(values >= params.full_well, -np.inf, snr))


def cis_unity_floor(params: CisParams, frames: int = 1) -> float:
    """Smallest θ with unit SNR, the positive root of Kθ² = θ + σ_read²."""
    frames = _check_frames(frames)
    return (1.0 + math.sqrt(1.0 + 4.0 * frames * params.read_noise ** 2)) / (2.0 * frames)


def cis_optimal_weights(durations: Sequence[float], flux: ArrayLike, params: Optional[CisParams] = None,
                        saturation: Optional[Sequence[float]] = None) -> CisWeights:
    """
    Exposure weights proportional to Δ_m among unsaturated exposures.

    A pixel whose exposures all saturate (Δ_m·λ >= L for every m) puts its
    whole weight on the shortest exposure and is flagged.

    Args:
        durations: sequence - Δ_m in seconds
        flux: float or np.ndarray - Flux estimate λ̂ per pixel
        params: CisParams - Only the full well is used
        saturation: sequence - Per-exposure saturation levels replacing the full well

    Returns:
        CisWeights - weights shaped (M,) + flux.shape
    """
    deltas = np.asarray(durations, dtype=np.float64)
    if deltas.ndim != 1 or deltas.size < 1 or np.any(deltas <= 0):
        raise DomainError("durations must be a non-empty list of positive values")
    flux = np.asarray(flux, dtype=np.float64)

    if saturation is None:
        if params is None:
            raise DomainError("either CIS parameters or saturation levels are required")
        limits = np.full(deltas.shape, float(params.full_well))
    else:
        limits = np.asarray(saturation, dtype=np.float64)
        if limits.shape != deltas.shape:
            raise DomainError("one saturation level per exposure is required")

    shape = (-1,) + (1,) * flux.ndim
    deltas_b = deltas.reshape(shape)
    unsaturated = deltas_b * flux[None, ...] < limits.reshape(shape)
    raw = np.where(unsaturated, deltas_b, 0.0)
    total = raw.sum(axis=0)
    saturated = total == 0

    shortest = np.zeros_like(raw)
    shortest[int(np.argmin(deltas))] = 1.0
    with np.errstate(invalid='ignore', divide='ignore'):
        weights = np.where(saturated[None, ...], shortest, raw / np.where(saturated, 1.0, total)[None, ...])
    return CisWeights(weights=weights, saturated=saturated)
