"""
HDR reconstruction from exposure-bracketed QIS stacks.

The fused image is a per-pixel linear combination of the LDR flux estimates.
Weights proportional to the squared exposure-referred SNR of each exposure
maximize the SNR of the combination; since that SNR depends on the unknown
flux, the reconstruction alternates fusing and re-weighting, reading the
per-exposure SNR from a precomputed lookup table. Clipped-high estimates
carry no weight wherever the pixel has an unclipped exposure.

Equal-weight and CIS-rule fusion act on the same LDR estimates as baselines.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from data.processor import LdrEstimate, LdrProcessor, Validity
from utils.cis_model import cis_optimal_weights
from utils.errors import DomainError
from utils.sensor_stats import DERIVATIVE_FLOOR, SensorParams, pixel_stats

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

METHODS = ('proposed', 'equal', 'cis')
# Smallest |1 - dλ̂/dλ| at which a Newton step is taken
NEWTON_STEP_FLOOR = 0.1


@dataclass(frozen=True)
class FusionConfig:
    """
    Args:
        max_iterations: int - Upper bound on fuse steps
        convergence_tol: float - Relative λ̂ change that stops the iteration
        lut_points: int - Samples of the SNR lookup table
        lut_range: tuple - (θ_min, θ_max) covered by the table; None means (1e-6, 10·L)
    """

    max_iterations: int = 10
    convergence_tol: float = 1e-6
    lut_points: int = 2048
    lut_range: Optional[Tuple[float, float]] = None

    def __post_init__(self):
        if int(self.max_iterations) != self.max_iterations or self.max_iterations < 1:
            raise DomainError(f"max_iterations must be a positive integer, got {self.max_iterations}")
        if not math.isfinite(self.convergence_tol) or self.convergence_tol <= 0:
            raise DomainError(f"convergence_tol must be positive, got {self.convergence_tol}")
        if int(self.lut_points) != self.lut_points or self.lut_points < 16:
            raise DomainError(f"lut_points must be an integer >= 16, got {self.lut_points}")
        if self.lut_range is not None:
            low, high = self.lut_range
            if not (0 < low < high) or not math.isfinite(high):
                raise DomainError(f"lut_range must satisfy 0 < θ_min < θ_max, got {self.lut_range}")
            object.__setattr__(self, 'lut_range', (float(low), float(high)))

    def theta_range(self, params: SensorParams) -> Tuple[float, float]:
        return self.lut_range or (1e-6, 10.0 * params.clip_level)


@dataclass(frozen=True, eq=False)
class WeightMap:
    """
    Args:
        weights: np.ndarray - Shape (M, ...), non-negative, summing to one along axis 0
        degenerate: np.ndarray - True where every SNR was zero
    """

    weights: np.ndarray
    degenerate: np.ndarray


def snr_per_exposure(flux: ArrayLike, duration: float, frames: int, params: SensorParams) -> ArrayLike:
    """
    Linear SNR of the K-frame LDR estimate of one exposure.

    √K·θ·μ_Y'/σ_Y with θ = Δ·λ; the moments are taken at θ + μ_dark·Δ.
    Zero for λ <= 0 and wherever the response has saturated.

    Args:
        flux: float or np.ndarray - λ in photons/second
        duration: float - Δ in seconds
        frames: int - K
        params: SensorParams

    Returns:
        float or np.ndarray - SNR (not dB)
    """
    values = np.asarray(flux, dtype=np.float64)
    if not np.all(np.isfinite(values)):
        raise DomainError("flux must be finite")
    theta = np.maximum(values, 0.0) * duration
    moments = pixel_stats(params.poisson_mean(theta, duration), params)

    slope = np.asarray(moments.derivative)
    std = np.sqrt(np.asarray(moments.variance))
    with np.errstate(divide='ignore', invalid='ignore'):
        snr = math.sqrt(frames) * theta * slope / std
    snr = np.where((theta <= 0) | (slope < DERIVATIVE_FLOOR) | (std == 0), 0.0, snr)
    return float(snr) if snr.ndim == 0 else snr


def optimal_weights(snr: np.ndarray) -> WeightMap:
    """
    Weights w[m] = s[m]² / Σ s[m]² along axis 0.

    Pixels whose SNRs are all zero get uniform weights and are flagged.
    """
    snr = np.asarray(snr, dtype=np.float64)
    if snr.ndim < 1 or snr.shape[0] < 1:
        raise DomainError("optimal_weights needs at least one exposure")
    if np.any(snr < 0) or not np.all(np.isfinite(snr)):
        raise DomainError("SNR values must be finite and non-negative")

    power = snr ** 2
    total = power.sum(axis=0)
    degenerate = total == 0
    safe_total = np.where(degenerate, 1.0, total)
    weights = np.where(degenerate[None, ...], 1.0 / snr.shape[0], power / safe_total)
    return WeightMap(weights=weights, degenerate=degenerate)


def reweight(snr: np.ndarray, usable: np.ndarray, durations: Sequence[float]) -> WeightMap:
    """
    Squared-SNR weights restricted to usable exposures.

    Pixels whose usable SNRs are all zero put their whole weight on the
    shortest usable exposure and are flagged degenerate.

    Args:
        snr: np.ndarray - Linear SNR, shape (M, ...)
        usable: np.ndarray - Bool mask of the same shape, at least one True per pixel
        durations: sequence - Δ_m per exposure

    Returns:
        WeightMap
    """
    snr = np.asarray(snr, dtype=np.float64)
    usable = np.broadcast_to(np.asarray(usable, dtype=bool), snr.shape)
    if not np.all(np.any(usable, axis=0)):
        raise DomainError("every pixel needs at least one usable exposure")

    weight_map = optimal_weights(np.where(usable, snr, 0.0))
    degenerate = np.asarray(weight_map.degenerate)
    if not np.any(degenerate):
        return weight_map

    expand = (-1,) + (1,) * (snr.ndim - 1)
    order = np.where(usable, np.reshape(np.asarray(durations, dtype=np.float64), expand), np.inf)
    fallback = np.asarray(np.argmin(order, axis=0))
    one_hot = np.arange(snr.shape[0]).reshape(expand) == fallback[None, ...]
    weights = np.where(degenerate[None, ...], one_hot.astype(np.float64), weight_map.weights)
    return WeightMap(weights=weights, degenerate=degenerate)


def _flux_stack(estimates: Sequence[Union[LdrEstimate, np.ndarray]]) -> np.ndarray:
    if len(estimates) == 0:
        raise DomainError("fusion needs at least one LDR estimate")
    return np.stack([
        estimate.flux_estimate if isinstance(estimate, LdrEstimate) else np.asarray(estimate, dtype=np.float64)
        for estimate in estimates
    ])


def usable_exposures(estimates: Sequence[Union[LdrEstimate, np.ndarray]]) -> np.ndarray:
    """
    Exposures allowed to carry weight, shape (M, ...).

    A clipped-high estimate is dropped wherever the pixel has at least one
    OK exposure; pixels without one keep every exposure. Bare arrays count
    as OK.
    """
    if len(estimates) == 0:
        raise DomainError("fusion needs at least one LDR estimate")
    validity = np.stack([
        np.asarray(estimate.validity) if isinstance(estimate, LdrEstimate)
        else np.full(np.shape(estimate), Validity.OK, dtype=np.uint8)
        for estimate in estimates
    ])
    has_ok = np.any(validity == Validity.OK, axis=0)
    return ~((validity == Validity.CLIPPED_HIGH) & has_ok[None, ...])


def fuse(estimates: Sequence[Union[LdrEstimate, np.ndarray]], weights: np.ndarray) -> np.ndarray:
    """λ̂ = Σ_m w[m]·S[m] per pixel."""
    flux = _flux_stack(estimates)
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape[0] != flux.shape[0]:
        raise DomainError(f"{weights.shape[0]} weights for {flux.shape[0]} estimates")
    return np.sum(weights.reshape(weights.shape + (1,) * (flux.ndim - weights.ndim)) * flux, axis=0)


def fuse_equal_weight(estimates: Sequence[Union[LdrEstimate, np.ndarray]]) -> np.ndarray:
    """Plain average of the LDR estimates."""
    flux = _flux_stack(estimates)
    return fuse(flux, np.full(flux.shape[0], 1.0 / flux.shape[0]))


def fuse_cis_weights(estimates: Sequence[LdrEstimate], params: SensorParams,
                     saturation: Optional[Sequence[float]] = None
                     ) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    CIS-rule fusion: weights ∝ Δ_m over exposures judged unsaturated.

    The flux used for the saturation test comes from one equal-weight pass.
    An exposure is saturated where Δ_m·λ̂ reaches its saturation level, by
    default the largest invertible θ of its K_m-frame average.

    Returns:
        tuple: (λ̂, weights shaped (M, ...), mask of pixels saturated in every exposure)
    """
    durations = [estimate.duration for estimate in estimates]
    if saturation is None:
        saturation = [LdrProcessor.saturation_cap(params, estimate.frames)[0] for estimate in estimates]

    initial = fuse_equal_weight(estimates)
    rule = cis_optimal_weights(durations, initial, saturation=saturation)
    saturated = np.asarray(rule.saturated, dtype=bool)
    if np.any(saturated):
        logger.warning(f"⚠ CIS rule: {int(np.count_nonzero(saturated))} pixels saturated in every exposure")
    return fuse(estimates, rule.weights), rule.weights, saturated


@dataclass(frozen=True, eq=False)
class SnrLut:
    """
    Per-exposure SNR tabulated on a log-spaced θ grid.

    SNR is stored in dB with zero coded as -∞ and interpolated linearly in
    (log θ, dB); intervals touching a -∞ node interpolate the linear SNR.
    Queries outside the grid clamp to its endpoints.

    Args:
        theta_grid: np.ndarray - Strictly increasing θ samples, shape (P,)
        snr_db: np.ndarray - Shape (M, P)
        durations: np.ndarray - Δ_m per row
    """

    theta_grid: np.ndarray
    snr_db: np.ndarray
    durations: np.ndarray

    def __post_init__(self):
        grid = np.asarray(self.theta_grid, dtype=np.float64)
        if grid.ndim != 1 or grid.size < 2 or np.any(np.diff(grid) <= 0) or grid[0] <= 0:
            raise DomainError("LUT grid must be positive and strictly increasing")
        table = np.asarray(self.snr_db, dtype=np.float64)
        if table.shape != (len(self.durations), grid.size):
            raise DomainError(f"LUT table shape {table.shape} does not match the grid")
        if np.any(np.isnan(table)) or np.any(table == np.inf):
            raise DomainError("LUT values must be finite or -inf")
        for array in (grid, table):
            array.setflags(write=False)
        object.__setattr__(self, 'theta_grid', grid)
        object.__setattr__(self, 'snr_db', table)
        object.__setattr__(self, 'durations', np.asarray(self.durations, dtype=np.float64))

    @property
    def log_theta(self) -> np.ndarray:
        return np.log(self.theta_grid)

    def _cell(self, index: int, theta: np.ndarray):
        """Bracketing grid nodes of each query: (x, x0, x1, y0, y1) in (log θ, dB)."""
        log_grid = self.log_theta
        row = self.snr_db[index]
        x = np.log(np.clip(theta, self.theta_grid[0], self.theta_grid[-1]))
        left = np.clip(np.searchsorted(log_grid, x, side='right') - 1, 0, log_grid.size - 2)
        return x, log_grid[left], log_grid[left + 1], row[left], row[left + 1]

    def query(self, index: int, theta: ArrayLike) -> np.ndarray:
        """Linear SNR of exposure `index` at per-frame signal θ; zero for θ <= 0."""
        theta = np.asarray(theta, dtype=np.float64)
        x, x0, x1, y0, y1 = self._cell(index, theta)
        t = (x - x0) / (x1 - x0)

        finite = np.isfinite(y0) & np.isfinite(y1)
        with np.errstate(invalid='ignore'):
            in_db = 10.0 ** ((y0 + t * (y1 - y0)) / 20.0)
            lin0, lin1 = 10.0 ** (y0 / 20.0), 10.0 ** (y1 / 20.0)
            in_linear = lin0 + t * (lin1 - lin0)
        snr = np.where(finite, in_db, in_linear)
        return np.where(theta > 0, snr, 0.0)

    def log_slope(self, index: int, theta: ArrayLike) -> np.ndarray:
        """
        d ln SNR / d ln θ of the interpolant for exposure `index`.

        Zero outside the grid (where queries clamp) and where the SNR is zero.
        """
        theta = np.asarray(theta, dtype=np.float64)
        x, x0, x1, y0, y1 = self._cell(index, theta)
        width = x1 - x0

        finite = np.isfinite(y0) & np.isfinite(y1)
        with np.errstate(invalid='ignore', divide='ignore', over='ignore'):
            in_db = (y1 - y0) / width * (math.log(10.0) / 20.0)
            lin0, lin1 = 10.0 ** (y0 / 20.0), 10.0 ** (y1 / 20.0)
            value = lin0 + (x - x0) / width * (lin1 - lin0)
            in_linear = np.where(value > 0, (lin1 - lin0) / width / value, 0.0)
        slope = np.where(finite, in_db, in_linear)
        inside = (theta > self.theta_grid[0]) & (theta < self.theta_grid[-1])
        return np.where(inside, slope, 0.0)

    def snr(self, flux: np.ndarray) -> np.ndarray:
        """Linear SNR of every exposure at flux λ̂, shape (M,) + flux.shape."""
        flux = np.asarray(flux, dtype=np.float64)
        return np.stack([self.query(m, delta * flux) for m, delta in enumerate(self.durations)])

    def slopes(self, flux: np.ndarray) -> np.ndarray:
        """log_slope of every exposure at flux λ̂, shape (M,) + flux.shape."""
        flux = np.asarray(flux, dtype=np.float64)
        return np.stack([self.log_slope(m, delta * flux) for m, delta in enumerate(self.durations)])


def build_snr_lut(schedule, params: SensorParams, config: Optional[FusionConfig] = None) -> SnrLut:
    """
    Tabulate snr_per_exposure for every group of a schedule.

    Args:
        schedule: ExposureSchedule - Δ_m and K_m
        params: SensorParams
        config: FusionConfig - Grid size and θ range

    Returns:
        SnrLut
    """
    config = config or FusionConfig()
    low, high = config.theta_range(params)
    grid = np.geomspace(low, high, int(config.lut_points))

    rows = []
    for group in schedule.groups:
        linear = snr_per_exposure(grid / group.duration, group.duration, group.frames, params)
        with np.errstate(divide='ignore'):
            rows.append(20.0 * np.log10(linear))
    logger.debug(f"SNR LUT: {len(rows)} exposures x {grid.size} points over θ ∈ [{low:g}, {high:g}]")
    return SnrLut(theta_grid=grid, snr_db=np.array(rows), durations=schedule.durations)


@dataclass(eq=False)
class Reconstruction:
    """
    Output of a fusion run.

    Args:
        flux: np.ndarray - λ̂ in photons/second
        weights: np.ndarray - Weights that produced flux, shape (M, height, width)
        iterations: int - Fuse steps performed
        converged: bool - Whether the relative change fell below tolerance
        history: list - Relative λ̂ change after each re-weighting
        degenerate: np.ndarray - Pixels whose usable SNRs were all zero (proposed),
            or that saturated in every exposure (cis)
        method: str - proposed, equal or cis
    """

    flux: np.ndarray
    weights: np.ndarray
    iterations: int
    converged: bool
    history: List[float] = field(default_factory=list)
    degenerate: Optional[np.ndarray] = None
    method: str = 'proposed'


def _relative_change(new: np.ndarray, old: np.ndarray) -> float:
    """‖new − old‖₂ / ‖old‖₂ over the whole image."""
    scale = float(np.linalg.norm(old))
    difference = float(np.linalg.norm(new - old))
    if scale == 0.0:
        return 0.0 if difference == 0.0 else math.inf
    return difference / scale


def _within(values: np.ndarray, lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
    return np.isfinite(values) & (values >= lower) & (values <= upper)


def _next_point(point: np.ndarray, fused: np.ndarray, weight_map: WeightMap, slopes: np.ndarray,
                flux_stack: np.ndarray, lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
    """
    Flux at which the next SNR update is evaluated.

    A Newton step on λ = Σ w(λ)·S[m], with dw/dλ taken from the LUT slopes.
    The root stays inside [lower, upper]; steps leaving it fall back to the
    fused value, or to the bracket midpoint when that lies outside as well.
    """
    weights = weight_map.weights
    mean_slope = np.sum(weights * slopes, axis=0)
    with np.errstate(divide='ignore', invalid='ignore'):
        gain = 2.0 * np.sum(weights * (slopes - mean_slope) * flux_stack, axis=0) / point
        gain = np.where(weight_map.degenerate, 0.0, gain)
        step = 1.0 - gain
        newton = point + (fused - point) / step

    take_newton = (point > 0) & (np.abs(step) >= NEWTON_STEP_FLOOR) & _within(newton, lower, upper)
    fallback = np.where(_within(fused, lower, upper), fused, 0.5 * (lower + upper))
    return np.where(take_newton, newton, fallback)


def iterative_reconstruct(estimates: Sequence[LdrEstimate], lut: SnrLut,
                          config: Optional[FusionConfig] = None) -> Reconstruction:
    """
    Alternate fusing and SNR re-weighting until λ̂ stops moving.

    Starts from uniform weights over the usable exposures. Each iteration
    reads the per-exposure SNR from the LUT at the current point, turns it
    into squared-SNR weights and fuses; the relative change between that
    point and the fused image decides convergence. The next point is a
    safeguarded Newton step towards λ = Σ w(λ)·S[m].

    Args:
        estimates: sequence - LdrEstimate per exposure, in schedule order
        lut: SnrLut - Built for the same schedule and sensor
        config: FusionConfig - Iteration budget and tolerance

    Returns:
        Reconstruction - flux is always Σ weights·S
    """
    config = config or FusionConfig()
    flux_stack = _flux_stack(estimates)
    count = flux_stack.shape[0]
    if count != len(lut.durations):
        raise DomainError(f"LUT covers {len(lut.durations)} exposures, got {count} estimates")

    if count == 1:
        return Reconstruction(flux=flux_stack[0].copy(), weights=np.ones_like(flux_stack),
                              iterations=1, converged=True,
                              degenerate=np.zeros(flux_stack.shape[1:], dtype=bool))

    usable = usable_exposures(estimates)
    dropped = int(np.count_nonzero(~usable))
    if dropped:
        logger.info(f"✓ Excluded {dropped} clipped-high estimates from the weights")

    # λ = Σ w·S always lies between the smallest and largest usable estimate
    lower = np.min(np.where(usable, flux_stack, np.inf), axis=0)
    upper = np.max(np.where(usable, flux_stack, -np.inf), axis=0)

    weights = usable / usable.sum(axis=0)
    flux = fuse(flux_stack, weights)
    point = flux
    degenerate = np.zeros(flux.shape, dtype=bool)
    history = []
    iterations = 1
    converged = False

    while iterations < config.max_iterations:
        weight_map = reweight(lut.snr(point), usable, lut.durations)
        weights, degenerate = weight_map.weights, weight_map.degenerate
        flux = fuse(flux_stack, weights)
        change = _relative_change(flux, point)
        history.append(change)
        iterations += 1
        logger.debug(f"iteration {iterations}: relative change {change:.3e}")

        if change < config.convergence_tol:
            converged = True
            break

        residual = flux - point
        lower = np.where(residual >= 0, np.maximum(lower, point), lower)
        upper = np.where(residual <= 0, np.minimum(upper, point), upper)
        point = _next_point(point, flux, weight_map, lut.slopes(point), flux_stack, lower, upper)

    if converged:
        logger.info(f"✓ Converged after {iterations} iterations")
    else:
        logger.warning(f"⚠ No convergence after {iterations} iterations "
                       f"(last change {history[-1] if history else float('nan'):.3e})")
    if np.any(degenerate):
        logger.warning(f"⚠ {int(np.count_nonzero(degenerate))} pixels have zero SNR in every usable exposure")

    return Reconstruction(flux=flux, weights=weights, iterations=iterations, converged=converged,
                          history=history, degenerate=degenerate)


class HdrReconstructor:
    """
    Runs one of the fusion methods on frame stacks acquired with a fixed schedule.

    Owns the SNR lookup table so repeated runs share it.
    """

    def __init__(self, schedule, params: SensorParams, config: Optional[FusionConfig] = None):
        self.schedule = schedule
        self.params = params
        self.config = config or FusionConfig()
        self._lut = None

    @property
    def lut(self) -> SnrLut:
        if self._lut is None:
            self._lut = build_snr_lut(self.schedule, self.params, self.config)
        return self._lut

    def run(self, stack, method: str = 'proposed') -> Reconstruction:
        """
        Reconstruct λ̂ from a FrameStack.

        Args:
            stack: FrameStack - Must match the reconstructor's schedule and sensor
            method: str - 'proposed', 'equal' or 'cis'

        Returns:
            Reconstruction
        """
        if method not in METHODS:
            raise DomainError(f"unknown fusion method '{method}', expected one of {', '.join(METHODS)}")
        if stack.schedule != self.schedule or stack.params != self.params:
            raise DomainError("stack was acquired with a different schedule or sensor")

        estimates = LdrProcessor.ldr_stack(stack)
        count = len(estimates)

        if method == 'proposed':
            result = iterative_reconstruct(estimates, self.lut, self.config)
        elif method == 'equal':
            flux = fuse_equal_weight(estimates)
            weights = np.full((count,) + flux.shape, 1.0 / count)
            result = Reconstruction(flux=flux, weights=weights, iterations=1, converged=True,
                                    degenerate=np.zeros(flux.shape, dtype=bool))
        else:
            flux, weights, saturated = fuse_cis_weights(estimates, self.params)
            result = Reconstruction(flux=flux, weights=weights, iterations=2 if count > 1 else 1,
                                    converged=True, degenerate=saturated)

        result.method = method
        logger.info(f"✓ {method} fusion done, mean λ̂ {float(np.mean(result.flux)):.4g} photons/s")
        return result
