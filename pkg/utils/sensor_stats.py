"""
Exact statistics of a quantized Poisson-Gaussian jot.

A jot collects K ~ Poisson(θ) electrons, the readout adds Gaussian noise with
standard deviation σ_read, and the ADC rounds the analog value to the nearest
integer and clips it to [0, L]. Single-bit operation is L = 1.

Rounding commutes with the integer photon count, so the readout reduces to
Y = clip(K + γ, 0, L) where γ is the rounded read noise with pmf p_k. Every
moment below is a finite sum of regularized incomplete gamma functions
Ψ_n(θ) = P(K < n) over the truncated support of p_k.

All functions are pure and accept scalars or numpy arrays for θ.
"""

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, Tuple, Union

import numpy as np
from scipy import special, stats

from utils.errors import DomainError

ArrayLike = Union[float, np.ndarray]

DEFAULT_PMF_EPSILON = 1e-12
DERIVATIVE_FLOOR = 1e-300
POISSON_TAIL = 1e-12

# Upper bound on the (θ, k, q) elements evaluated per block.
_BLOCK_ELEMENTS = 1_000_000


@dataclass(frozen=True)
class SensorParams:
    """
    Physics of one jot.

    Args:
        clip_level: int - Full-scale ADC code L (electrons); 1 means single-bit
        read_noise: float - Read noise σ_read (electrons r.m.s.)
        dark_current: float - Dark current μ_dark (electrons per second)
    """

    clip_level: int
    read_noise: float = 0.0
    dark_current: float = 0.0

    def __post_init__(self):
        try:
            level = float(self.clip_level)
        except (TypeError, ValueError):
            raise DomainError(f"clip level must be an integer, got {self.clip_level!r}")
        if isinstance(self.clip_level, bool) or not level.is_integer() or level < 1:
            raise DomainError(f"clip level must be an integer >= 1, got {self.clip_level!r}")
        object.__setattr__(self, 'clip_level', int(level))

        for name in ('read_noise', 'dark_current'):
            value = float(getattr(self, name))
            if not math.isfinite(value) or value < 0:
                raise DomainError(f"{name} must be finite and non-negative, got {value}")
            object.__setattr__(self, name, value)

    @classmethod
    def from_bits(cls, bits: int, read_noise: float = 0.0, dark_current: float = 0.0) -> 'SensorParams':
        """Sensor with a b-bit ADC, i.e. L = 2^b - 1."""
        if int(bits) != bits or not 1 <= bits <= 16:
            raise DomainError(f"bit depth must be an integer in [1, 16], got {bits}")
        return cls(2 ** int(bits) - 1, read_noise, dark_current)

    @property
    def is_single_bit(self) -> bool:
        return self.clip_level == 1

    def poisson_mean(self, theta_signal: ArrayLike, duration: float) -> ArrayLike:
        """Total Poisson mean ϑ = θ_signal + μ_dark·Δ."""
        return theta_signal + self.dark_current * duration

    def to_dict(self) -> Dict[str, float]:
        return {
            'clip_level': self.clip_level,
            'read_noise': self.read_noise,
            'dark_current': self.dark_current,
        }


@dataclass(frozen=True, eq=False)
class ReadNoisePmf:
    """
    Distribution of the rounded read noise γ = round(η_read).

    Args:
        offsets: np.ndarray - Integer support -k_max..k_max
        probs: np.ndarray - p_k for each offset, renormalized to sum to one
        truncation_epsilon: float - Tail mass allowed outside the support
    """

    offsets: np.ndarray
    probs: np.ndarray
    truncation_epsilon: float

    @property
    def k_max(self) -> int:
        return int(self.offsets[-1])

    def as_dict(self) -> Dict[int, float]:
        return {int(k): float(p) for k, p in zip(self.offsets, self.probs)}

    def __len__(self) -> int:
        return len(self.offsets)


@dataclass(frozen=True, eq=False)
class PixelStats:
    """
    Moments of the digitized jot response at a given θ.

    `deficit` is L - μ_Y evaluated directly, which keeps full relative precision
    deep in saturation where μ_Y itself rounds to L.
    """

    mean: ArrayLike
    variance: ArrayLike
    derivative: ArrayLike
    deficit: ArrayLike

    @property
    def std(self) -> ArrayLike:
        return np.sqrt(self.variance)


def _as_theta(theta: ArrayLike) -> np.ndarray:
    values = np.asarray(theta, dtype=np.float64)
    if not np.all(np.isfinite(values)):
        raise DomainError("θ must be finite")
    if np.any(values < 0):
        raise DomainError(f"θ must be non-negative, got min {values.min()}")
    return values


def _as_frames(frames: int) -> int:
    if isinstance(frames, bool) or int(frames) != frames or frames < 1:
        raise DomainError(f"frame count must be a positive integer, got {frames!r}")
    return int(frames)


def _unwrap(values: np.ndarray) -> ArrayLike:
    return float(values) if np.ndim(values) == 0 else values


def _lower_cdf(n: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Ψ_n(θ) = P(K < n), zero for n <= 0."""
    valid = n >= 1
    return np.where(valid, special.gammaincc(np.where(valid, n, 1), theta), 0.0)


def _upper_tail(n: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """P(K >= n) = 1 - Ψ_n(θ), one for n <= 0."""
    valid = n >= 1
    return np.where(valid, special.gammainc(np.where(valid, n, 1), theta), 1.0)


def _poisson_pmf(j: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Poisson pmf in log space; zero for negative j."""
    j = np.asarray(j)
    valid = j >= 0
    jj = np.where(valid, j, 0)
    log_pmf = special.xlogy(jj, theta) - theta - special.gammaln(jj + 1.0)
    return np.where(valid, np.exp(log_pmf), 0.0)


def incomplete_gamma_psi(q: ArrayLike, theta: ArrayLike) -> ArrayLike:
    """
    Partial Poisson CDF Ψ_q(θ) = Σ_{k=0}^{q-1} θ^k e^{-θ} / k!.

    Args:
        q: int or array - Number of leading Poisson terms (q = 0 is the empty sum)
        theta: float or array - Poisson mean

    Returns:
        float or np.ndarray - Values in [0, 1]
    """
    q_values = np.asarray(q, dtype=np.float64)
    if not np.all(np.isfinite(q_values)) or np.any(q_values < 0) or np.any(np.floor(q_values) != q_values):
        raise DomainError(f"q must be a non-negative integer, got {q!r}")
    return _unwrap(_lower_cdf(q_values, _as_theta(theta)))


def read_noise_pmf(read_noise: float, epsilon: float = DEFAULT_PMF_EPSILON) -> ReadNoisePmf:
    """
    Rounded read-noise pmf p_k = Φ((k+0.5)/σ) - Φ((k-0.5)/σ).

    The support is cut at the smallest k_max whose two-sided tail mass beyond
    ±(k_max + 0.5) is below epsilon, then renormalized.

    Args:
        read_noise: float - σ_read in electrons
        epsilon: float - Allowed truncated tail mass, 0 < ε < 1e-3

    Returns:
        ReadNoisePmf - Symmetric pmf (cached, read-only arrays)
    """
    sigma = float(read_noise)
    eps = float(epsilon)
    if not math.isfinite(sigma) or sigma < 0:
        raise DomainError(f"read noise must be finite and non-negative, got {read_noise}")
    if not 0 < eps < 1e-3:
        raise DomainError(f"truncation epsilon must lie in (0, 1e-3), got {epsilon}")
    return _cached_read_noise_pmf(sigma, eps)


@lru_cache(maxsize=128)
def _cached_read_noise_pmf(sigma: float, eps: float) -> ReadNoisePmf:
    if sigma == 0.0:
        offsets = np.zeros(1, dtype=np.int64)
        probs = np.ones(1)
    else:
        k_max = max(0, math.ceil(sigma * stats.norm.isf(eps / 2.0) - 0.5) - 1)
        while 2.0 * stats.norm.sf((k_max + 0.5) / sigma) >= eps:
            k_max += 1

        magnitude = np.arange(k_max + 1, dtype=np.float64)
        # Tail differences keep precision far from the mode.
        half = stats.norm.sf((magnitude - 0.5) / sigma) - stats.norm.sf((magnitude + 0.5) / sigma)
        half[0] = 1.0 - 2.0 * stats.norm.sf(0.5 / sigma)

        offsets = np.arange(-k_max, k_max + 1, dtype=np.int64)
        probs = np.concatenate([half[:0:-1], half])
        probs = probs / probs.sum()

    offsets.setflags(write=False)
    probs.setflags(write=False)
    return ReadNoisePmf(offsets=offsets, probs=probs, truncation_epsilon=eps)


def _moments(theta: np.ndarray, params: SensorParams) -> Tuple[np.ndarray, ...]:
    """Mean, variance, derivative and deficit for a flat θ array."""
    pmf = read_noise_pmf(params.read_noise)
    L = params.clip_level
    levels = np.arange(L, dtype=np.float64)

    # shift[k, q] = q - k; Y > q given γ = k  <=>  K >= q - k + 1
    shift = levels[None, :] - pmf.offsets[:, None].astype(np.float64)
    rising = 2.0 * levels + 1.0
    falling = 2.0 * (L - 1 - levels) + 1.0

    mean = np.empty_like(theta)
    variance = np.empty_like(theta)
    derivative = np.empty_like(theta)
    deficit = np.empty_like(theta)

    block = max(1, _BLOCK_ELEMENTS // shift.size)
    for start in range(0, theta.size, block):
        t = theta[start:start + block, None, None]

        p_above = np.einsum('ckq,k->cq', _upper_tail(shift + 1.0, t), pmf.probs)
        p_below = np.einsum('ckq,k->cq', _lower_cdf(shift + 1.0, t), pmf.probs)
        slope = np.einsum('ckq,k->c', _poisson_pmf(shift, t), pmf.probs)

        counts_mean = p_above.sum(axis=-1)
        deficit_mean = p_below.sum(axis=-1)
        counts_var = p_above @ rising - counts_mean ** 2
        deficit_var = p_below @ falling - deficit_mean ** 2

        # Evaluate in whichever of Y and L - Y has the smaller mean.
        use_counts = counts_mean <= deficit_mean
        stop = start + t.shape[0]
        mean[start:stop] = np.where(use_counts, counts_mean, L - deficit_mean)
        deficit[start:stop] = np.where(use_counts, L - counts_mean, deficit_mean)
        variance[start:stop] = np.maximum(np.where(use_counts, counts_var, deficit_var), 0.0)
        derivative[start:stop] = slope

    return mean, variance, derivative, deficit


def pixel_stats(theta: ArrayLike, params: SensorParams) -> PixelStats:
    """
    Mean μ_Y, variance σ_Y² and slope dμ_Y/dθ of the digitized response.

    θ is the total Poisson mean; callers fold dark current in beforehand
    (see SensorParams.poisson_mean). The slope is the term-wise derivative of
    the μ_Y series, using dΨ_n/dθ = -Poisson(n-1; θ).

    Args:
        theta: float or np.ndarray - Poisson mean(s), finite and >= 0
        params: SensorParams - Jot physics

    Returns:
        PixelStats - Same shape as theta
    """
    values = _as_theta(theta)
    flat = np.ascontiguousarray(values, dtype=np.float64).ravel()
    mean, variance, derivative, deficit = _moments(flat, params)
    shape = values.shape
    return PixelStats(
        mean=_unwrap(mean.reshape(shape)),
        variance=_unwrap(variance.reshape(shape)),
        derivative=_unwrap(derivative.reshape(shape)),
        deficit=_unwrap(deficit.reshape(shape)),
    )


def closed_form_moments(theta: ArrayLike, params: SensorParams) -> Tuple[ArrayLike, ArrayLike]:
    """
    μ_Y and σ_Y² assembled from the closed-form decomposition.

    μ_Y = θΨ_{L-1}(θ) + L(1 - Ψ_L(θ)) + Δ_μ(θ) and
    σ_Y² = L² - Σ_q (2q+1)Ψ_{q+1}(θ) + Δ_σ²(θ) - μ_Y², where the read-noise
    corrections sum p_k-weighted differences of shifted Poisson terms. The
    -P(K = q) part of each correction runs over every level q = 1..L-1.

    Independent of pixel_stats and used to cross-check it.
    """
    values = _as_theta(theta)
    pmf = read_noise_pmf(params.read_noise)
    L = params.clip_level
    levels = np.arange(L, dtype=np.float64)
    k = pmf.offsets.astype(np.float64)[:, None]
    t = values[..., None]

    base_mean = values * _lower_cdf(np.float64(L - 1), values) + L * (1.0 - _lower_cdf(np.float64(L), values))
    base_second = L ** 2 - (_lower_cdf(levels + 1.0, t) * (2.0 * levels + 1.0)).sum(axis=-1)

    tt = values[..., None, None]
    level_terms = _poisson_pmf(levels - k, tt) - _poisson_pmf(levels + 0.0 * k, tt)
    tail_terms = _lower_cdf(np.float64(L), values[..., None]) - _lower_cdf(np.maximum(L - k[:, 0], 0.0), values[..., None])

    delta_mu = ((level_terms * levels).sum(axis=-1) + L * tail_terms) @ pmf.probs
    delta_sigma2 = ((level_terms * levels ** 2).sum(axis=-1) + L ** 2 * tail_terms) @ pmf.probs

    mean = base_mean + delta_mu
    variance = base_second + delta_sigma2 - mean ** 2
    return _unwrap(mean), _unwrap(variance)


def exposure_referred_noise(theta: ArrayLike, params: SensorParams, frames: int = 1) -> ArrayLike:
    """
    σ_H = √K · σ_Y · dθ/dμ_Y for the sum of K frames.

    Returns +∞ wherever the response slope falls below 1e-300 (deep saturation).
    """
    frames = _as_frames(frames)
    moments = pixel_stats(theta, params)
    slope = np.asarray(moments.derivative)
    with np.errstate(divide='ignore', invalid='ignore'):
        noise = math.sqrt(frames) * np.sqrt(moments.variance) / slope
    noise = np.where(slope < DERIVATIVE_FLOOR, np.inf, noise)
    return _unwrap(noise)


def snr_ratio(theta: ArrayLike, params: SensorParams, frames: int = 1) -> ArrayLike:
    """Linear exposure-referred SNR √N·θ·(dμ_Y/dθ)/σ_Y; zero at θ = 0 and in saturation."""
    frames = _as_frames(frames)
    values = _as_theta(theta)
    moments = pixel_stats(values, params)
    slope = np.asarray(moments.derivative)
    std = np.sqrt(moments.variance)
    with np.errstate(divide='ignore', invalid='ignore'):
        ratio = math.sqrt(frames) * values * slope / std
    ratio = np.where((values == 0) | (slope < DERIVATIVE_FLOOR), 0.0, ratio)
    return _unwrap(ratio)


def snr_h(theta: ArrayLike, params: SensorParams, frames: int = 1) -> ArrayLike:
    """
    Exposure-referred SNR of the sum of N frames, in dB.

    Args:
        theta: float or np.ndarray - Poisson mean per frame
        params: SensorParams - Jot physics
        frames: int - N

    Returns:
        float or np.ndarray - 20·log10(√N·θ·μ_Y'/σ_Y); -∞ at θ = 0 and in saturation
    """
    ratio = np.asarray(snr_ratio(theta, params, frames))
    with np.errstate(divide='ignore'):
        return _unwrap(20.0 * np.log10(ratio))


def pz_density(z: ArrayLike, theta: float, read_noise: float) -> ArrayLike:
    """
    Density of the analog readout Z = K + η_read (Poisson-Gaussian mixture).

    Poisson components are kept where their two-sided tail is at least 1e-12.

    Args:
        z: float or np.ndarray - Analog values in electrons
        theta: float - Poisson mean
        read_noise: float - σ_read > 0 (σ_read = 0 has no density; use the Poisson pmf)

    Returns:
        float or np.ndarray - Density values
    """
    sigma = float(read_noise)
    if not math.isfinite(sigma) or sigma <= 0:
        raise DomainError("pz_density needs σ_read > 0; use the Poisson pmf for noiseless readout")
    mean = float(_as_theta(theta))

    if mean == 0.0:
        lowest, highest = 0, 0
    else:
        lowest = max(0, int(stats.poisson.ppf(POISSON_TAIL, mean)) - 1)
        highest = int(stats.poisson.isf(POISSON_TAIL, mean)) + 1

    levels = np.arange(lowest, highest + 1, dtype=np.float64)
    weights = _poisson_pmf(levels, mean)
    points = np.asarray(z, dtype=np.float64)
    density = stats.norm.pdf(points[..., None], loc=levels, scale=sigma) @ weights
    return _unwrap(density)


def response_curve(theta: ArrayLike, params: SensorParams) -> ArrayLike:
    """Expected ADC output μ_Y over a θ grid (the QIS tone curve f)."""
    return pixel_stats(theta, params).mean
