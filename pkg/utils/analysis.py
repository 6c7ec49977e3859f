"""
Analytics built on the sensor models: SNR curves, dynamic range,
fused-exposure SNR, photon-counting histogram fits and the log-MSE metric.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Sequence, Union

import numpy as np
import pandas as pd
from scipy import optimize

from data.processor import LdrProcessor
from data.validators import DataValidator
from utils.cis_model import CisParams, cis_optimal_weights, cis_snr_h
from utils.errors import DomainError, FitError
from utils.hdr_fusion import snr_per_exposure
from utils.sensor_stats import SensorParams, pz_density, snr_h

logger = logging.getLogger(__name__)

DEFAULT_POINTS_PER_DECADE = 512
MIN_HISTOGRAM_SAMPLES = 1000


@dataclass(frozen=True, eq=False)
class SnrCurve:
    """
    Sampled SNR curve.

    Args:
        abscissa: np.ndarray - Flux λ, θ or frame count, strictly increasing
        snr_db: np.ndarray - SNR in dB (-inf where there is no signal)
        provenance: dict - Parameters the curve was computed from
        kind: str - What the abscissa measures ('flux', 'theta', 'frames')
    """

    abscissa: np.ndarray
    snr_db: np.ndarray
    provenance: Dict[str, Any] = field(default_factory=dict)
    kind: str = 'flux'

    def __post_init__(self):
        x = np.asarray(self.abscissa, dtype=np.float64)
        y = np.asarray(self.snr_db, dtype=np.float64)
        is_valid, error = DataValidator.validate_grid(x)
        if not is_valid:
            raise DomainError(f"invalid SNR curve abscissa: {error}")
        if y.shape != x.shape:
            raise DomainError(f"SNR curve has {x.size} abscissae but {y.size} values")
        object.__setattr__(self, 'abscissa', x)
        object.__setattr__(self, 'snr_db', y)

    def __len__(self) -> int:
        return self.abscissa.size

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({'abscissa': self.abscissa, 'snr_db': self.snr_db})


@dataclass(frozen=True)
class DynamicRangeReport:
    floor: float
    ceiling: float
    range_db: float
    threshold_db: float = 0.0
    has_range: bool = True

    def to_dict(self) -> Dict[str, Any]:
        return {
            'floor': self.floor,
            'ceiling': self.ceiling,
            'range_db': self.range_db,
            'threshold_db': self.threshold_db,
            'has_range': self.has_range,
        }


@dataclass(frozen=True, eq=False)
class HistogramFit:
    """
    Args:
        flux: float - Fitted λ in photons/second
        theta: float - Fitted signal electrons per reading, λ·Δ
        mse: float - Residual between histogram density and model density
        centers: np.ndarray - Bin centers in electrons
        density: np.ndarray - Empirical density per bin
    """

    flux: float
    theta: float
    mse: float
    centers: np.ndarray
    density: np.ndarray


def flux_grid(low: float, high: float, points_per_decade: int = DEFAULT_POINTS_PER_DECADE) -> np.ndarray:
    """Log-spaced grid from low to high with the given density per decade."""
    if not (0 < low < high) or not math.isfinite(high):
        raise DomainError(f"grid bounds must satisfy 0 < low < high, got {low}, {high}")
    if points_per_decade < 1:
        raise DomainError(f"points_per_decade must be positive, got {points_per_decade}")
    points = max(2, int(math.ceil(math.log10(high / low) * points_per_decade)) + 1)
    return np.geomspace(low, high, points)


def qis_snr_curve(params: SensorParams, duration: float, frames: int, grid: np.ndarray) -> SnrCurve:
    """
    Exposure-referred SNR of N summed QIS frames over a flux grid.

    Evaluated at θ = Δ·λ + μ_dark·Δ.
    """
    grid = np.asarray(grid, dtype=np.float64)
    theta = params.poisson_mean(grid * duration, duration)
    return SnrCurve(
        abscissa=grid,
        snr_db=np.asarray(snr_h(theta, params, frames)),
        provenance={'sensor': params.to_dict(), 'duration': duration, 'frames': int(frames)},
    )


def cis_snr_curve(params: CisParams, duration: float, frames: int, grid: np.ndarray) -> SnrCurve:
    """Exposure-referred SNR of a single CIS exposure over a flux grid."""
    grid = np.asarray(grid, dtype=np.float64)
    return SnrCurve(
        abscissa=grid,
        snr_db=np.asarray(cis_snr_h(grid * duration, params, frames)),
        provenance={'cis': params.to_dict(), 'duration': duration, 'frames': int(frames)},
    )


def _rule_weights(rule, params: SensorParams, schedule, grid: np.ndarray, snr: np.ndarray) -> np.ndarray:
    count = schedule.num_groups
    if isinstance(rule, str):
        if rule == 'optimal':
            power = snr ** 2
            total = power.sum(axis=0)
            return np.where(total > 0, power / np.where(total > 0, total, 1.0), 1.0 / count)
        if rule == 'equal':
            return np.full(snr.shape, 1.0 / count)
        if rule == 'cis':
            caps = [LdrProcessor.saturation_cap(params, group.frames)[0] for group in schedule.groups]
            return cis_optimal_weights(schedule.durations, grid, saturation=caps).weights
        raise DomainError(f"unknown weight rule '{rule}'")

    weights = np.asarray(rule, dtype=np.float64)
    if weights.shape != (count,) or np.any(weights < 0) or not math.isclose(weights.sum(), 1.0, abs_tol=1e-9):
        raise DomainError(f"fixed weights must be {count} non-negative values summing to one")
    return np.broadcast_to(weights[:, None], snr.shape)


def fused_snr_curve(params: SensorParams, schedule, grid: np.ndarray,
                    weight_rule: Union[str, Sequence[float]] = 'optimal') -> SnrCurve:
    """
    SNR of the linearly fused HDR estimate over a flux grid.

    Each exposure contributes an LDR estimate with relative noise 1/s_m, so
    λ̂ = Σ w_m·S_m has SNR 1/√(Σ w_m²/s_m²). Optimal weights give √(Σ s_m²).

    Args:
        params: SensorParams
        schedule: ExposureSchedule
        grid: np.ndarray - Flux values λ
        weight_rule: 'optimal', 'equal', 'cis' or fixed weights (one per exposure)

    Returns:
        SnrCurve
    """
    grid = np.asarray(grid, dtype=np.float64)
    snr = np.stack([
        np.asarray(snr_per_exposure(grid, group.duration, group.frames, params))
        for group in schedule.groups
    ])
    weights = _rule_weights(weight_rule, params, schedule, grid, snr)

    with np.errstate(divide='ignore', invalid='ignore'):
        terms = np.where(weights > 0, weights ** 2 / snr ** 2, 0.0)
        fused = 1.0 / np.sqrt(terms.sum(axis=0))
        fused_db = 20.0 * np.log10(fused)

    rule_name = weight_rule if isinstance(weight_rule, str) else 'fixed'
    return SnrCurve(
        abscissa=grid,
        snr_db=fused_db,
        provenance={'sensor': params.to_dict(), **schedule.to_dict(), 'weight_rule': rule_name},
    )


def _crossing(x0: float, x1: float, y0: float, y1: float, threshold: float, fallback: float) -> float:
    if not (math.isfinite(y0) and math.isfinite(y1)) or y0 == y1:
        return fallback
    t = (threshold - y0) / (y1 - y0)
    return math.exp(math.log(x0) + t * (math.log(x1) - math.log(x0)))


def dynamic_range(curve: SnrCurve, threshold_db: float = 0.0) -> DynamicRangeReport:
    """
    Span of abscissae whose SNR reaches the threshold.

    The floor and ceiling are the outermost threshold crossings, linearly
    interpolated in (log abscissa, dB); a crossing next to a -∞ sample snaps
    to the last sample above threshold.

    Returns:
        DynamicRangeReport - has_range is False when no sample reaches the threshold
    """
    x, y = curve.abscissa, curve.snr_db
    above = np.flatnonzero(y >= threshold_db)
    if above.size == 0:
        logger.warning(f"⚠ SNR never reaches {threshold_db:g} dB")
        return DynamicRangeReport(floor=math.nan, ceiling=math.nan, range_db=0.0,
                                  threshold_db=threshold_db, has_range=False)

    first, last = int(above[0]), int(above[-1])
    floor = x[first]
    if first > 0:
        floor = _crossing(x[first - 1], x[first], y[first - 1], y[first], threshold_db, x[first])
    ceiling = x[last]
    if last < x.size - 1:
        ceiling = _crossing(x[last], x[last + 1], y[last], y[last + 1], threshold_db, x[last])

    range_db = 20.0 * math.log10(ceiling / floor)
    logger.info(f"✓ Dynamic range {range_db:.2f} dB ({floor:.4g} to {ceiling:.4g})")
    return DynamicRangeReport(floor=float(floor), ceiling=float(ceiling), range_db=range_db,
                              threshold_db=threshold_db)


def read_noise_accumulation(params: SensorParams, flux: float, total_time: float,
                            frame_counts: Sequence[int], cis: Optional[CisParams] = None) -> SnrCurve:
    """
    SNR of a fixed total integration time split into N frames.

    Each split frame integrates Δ = total_time/N and pays its own read noise,
    so noisy readouts lose SNR as N grows while sub-electron jots do not.

    Args:
        params: SensorParams - QIS jot (ignored when cis is given)
        flux: float - λ in photons/second
        total_time: float - Total integration time in seconds
        frame_counts: sequence - Increasing N values
        cis: CisParams - Evaluate a CIS with read noise instead

    Returns:
        SnrCurve with kind 'frames'
    """
    counts = np.asarray(frame_counts, dtype=np.int64)
    if flux <= 0 or total_time <= 0:
        raise DomainError("flux and total time must be positive")
    if np.any(counts < 1):
        raise DomainError("frame counts must be positive")

    values = []
    for frames in counts:
        duration = total_time / frames
        if cis is not None:
            values.append(float(cis_snr_h(flux * duration, cis, int(frames))))
        else:
            linear = snr_per_exposure(flux, duration, int(frames), params)
            values.append(20.0 * math.log10(linear) if linear > 0 else -math.inf)

    provenance = {'flux': flux, 'total_time': total_time}
    provenance.update({'cis': cis.to_dict()} if cis is not None else {'sensor': params.to_dict()})
    return SnrCurve(abscissa=counts.astype(np.float64), snr_db=np.array(values),
                    provenance=provenance, kind='frames')


def _histogram(samples: np.ndarray, bin_width: float):
    low = int(math.floor(samples.min() / bin_width + 0.5))
    high = int(math.floor(samples.max() / bin_width + 0.5))
    edges = (np.arange(low, high + 2) - 0.5) * bin_width
    counts, edges = np.histogram(samples, bins=edges)
    centers = 0.5 * (edges[:-1] + edges[1:])
    return centers, counts / (samples.size * bin_width), counts


def histogram_fit(samples: Sequence[float], read_noise: float, dark_current: float = 0.0,
                  duration: float = 1.0, bin_width: float = 0.05) -> HistogramFit:
    """
    Fit the flux of repeated analog readings by histogram matching.

    The readings are binned at the readout LSB, normalized to a density and
    compared with the Poisson-Gaussian density; λ minimizes the mean squared
    difference, searched coarsely on a log grid and refined by golden section
    in log λ.

    Args:
        samples: sequence - Analog readings in electrons (at least 1000)
        read_noise: float - σ_read > 0
        dark_current: float - μ_dark in electrons/second
        duration: float - Integration time Δ of each reading
        bin_width: float - Histogram bin width in electrons

    Returns:
        HistogramFit
    """
    values = np.asarray(samples, dtype=np.float64).ravel()
    if values.size < MIN_HISTOGRAM_SAMPLES:
        raise DomainError(f"histogram fit needs at least {MIN_HISTOGRAM_SAMPLES} samples, got {values.size}")
    if not np.all(np.isfinite(values)):
        raise DomainError("samples must be finite")
    if read_noise <= 0 or duration <= 0 or bin_width <= 0:
        raise DomainError("read noise, duration and bin width must be positive")

    centers, density, counts = _histogram(values, bin_width)
    if np.count_nonzero(counts) < 2:
        raise FitError("histogram collapses into a single bin")

    dark = dark_current * duration

    def objective(log_theta: float) -> float:
        model = pz_density(centers, math.exp(log_theta) + dark, read_noise)
        return float(np.mean((model - density) ** 2))

    upper = max(10.0, 4.0 * float(values.mean()) + 1.0)
    coarse = np.linspace(math.log(1e-4), math.log(upper), 64)
    scores = np.array([objective(point) for point in coarse])
    best = int(np.argmin(scores))

    if 0 < best < coarse.size - 1:
        result = optimize.minimize_scalar(objective, bracket=(coarse[best - 1], coarse[best], coarse[best + 1]),
                                          method='golden')
    else:
        lo, hi = coarse[max(best - 1, 0)], coarse[min(best + 1, coarse.size - 1)]
        result = optimize.minimize_scalar(objective, bounds=(lo, hi), method='bounded')

    theta = math.exp(float(result.x))
    logger.info(f"✓ Histogram fit: θ = {theta:.4g} e- per reading ({values.size} samples)")
    return HistogramFit(flux=theta / duration, theta=theta, mse=float(result.fun),
                        centers=centers, density=density)


def lmse(estimate: np.ndarray, truth: np.ndarray, eps_fraction: float = 1e-4) -> float:
    """
    Mean squared error of log10 intensities.

    Both maps are offset by ε = eps_fraction·max(truth) before the log.
    """
    estimate = np.asarray(estimate, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if estimate.shape != truth.shape:
        raise DomainError(f"estimate shape {estimate.shape} does not match ground truth {truth.shape}")
    if np.any(truth < 0) or np.any(estimate < 0):
        raise DomainError("log-MSE needs non-negative maps")

    peak = float(truth.max()) if truth.size else 0.0
    eps = eps_fraction * peak if peak > 0 else eps_fraction
    return float(np.mean((np.log10(estimate + eps) - np.log10(truth + eps)) ** 2))
