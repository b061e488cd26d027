"""Synthetic channel data for spherical absorbers.

The forward model is the closed-form pressure of a uniformly heated sphere (a
bipolar N-wave) seen by point receivers, convolved with a Gaussian-modulated
cosine detector response. The convolution integral over the short N-wave
support is evaluated by midpoint quadrature against the continuous-time pulse,
so arrival times are exact to well below one sample.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .core import AcquisitionParams, ArrayGeometry, ChannelDataSet

# Envelope level at which the detector pulse is truncated.
PULSE_TRUNCATION = 1e-3
# Quadrature points across one N-wave.
NWAVE_QUADRATURE = 64
# Clean samples above this fraction of the peak form the signal support for SNR.
SUPPORT_FRACTION = 1e-6

REFERENCE_CENTER_FREQUENCY = 4e6
REFERENCE_FRACTIONAL_BANDWIDTH = 0.77


@dataclass(frozen=True)
class Absorber:
    center: tuple[float, float]
    radius: float = 0.1e-3
    amplitude: float = 1.0

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"absorber radius must be positive, got {self.radius}")
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))


@dataclass(frozen=True)
class Phantom:
    absorbers: tuple[Absorber, ...]

    def __post_init__(self):
        object.__setattr__(self, "absorbers", tuple(self.absorbers))

    @classmethod
    def reference_default(cls) -> "Phantom":
        """Five 0.1 mm absorbers on the vertical axis, every 5 mm from 25 mm."""
        return cls(tuple(Absorber((0.0, depth * 1e-3)) for depth in (25, 30, 35, 40, 45)))

    def scaled(self, factor: float) -> "Phantom":
        return Phantom(tuple(Absorber(a.center, a.radius, a.amplitude * factor) for a in self.absorbers))


@dataclass(frozen=True)
class NoiseSpec:
    """Target channel SNR in dB (``math.inf`` for no noise) and generator seed."""

    target_snr_db: float = 50.0
    seed: int = 0

    def __post_init__(self):
        if int(self.seed) != self.seed or not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {self.seed}")


def nwave_pressure(distance, radius, amplitude, time, sound_speed):
    """Pressure at ``distance`` from the center of a uniformly heated sphere.

    ``p0 (R - c t) / (2 R)`` while ``|R - c t| <= a``, zero otherwise. Accepts
    arrays for ``time``.
    """
    if not distance > radius > 0:
        raise ValueError(f"need distance > radius > 0, got R={distance}, a={radius}")
    t = np.asarray(time, dtype=np.float64)
    if np.any(t < 0):
        raise ValueError("time must be non-negative")
    offset = distance - sound_speed * t
    p = np.where(np.abs(offset) <= radius, amplitude * offset / (2.0 * distance), 0.0)
    return p if p.ndim else float(p)


def _pulse_sigma(center_freq: float, fractional_bandwidth: float) -> float:
    # Gaussian envelope whose amplitude spectrum is at half height at fc +/- B/2.
    half_width = fractional_bandwidth * center_freq / 2.0
    return math.sqrt(2.0 * math.log(2.0)) / (2.0 * math.pi * half_width)


def _pulse_halflength(sigma: float) -> float:
    return sigma * math.sqrt(-2.0 * math.log(PULSE_TRUNCATION))


def _check_pulse_args(center_freq, fractional_bandwidth, fs):
    if not 0 < center_freq < fs / 2:
        raise ValueError(f"need 0 < fc < fs/2, got fc={center_freq}, fs={fs}")
    if not 0 < fractional_bandwidth < 2:
        raise ValueError(f"fractional bandwidth must lie in (0, 2), got {fractional_bandwidth}")


def _pulse(t, center_freq, sigma, halflength):
    t = np.asarray(t, dtype=np.float64)
    shape = np.exp(-0.5 * (t / sigma) ** 2) * np.cos(2.0 * math.pi * center_freq * t)
    return np.where(np.abs(t) <= halflength, shape, 0.0)


def impulse_response(center_freq: float = REFERENCE_CENTER_FREQUENCY,
                     fractional_bandwidth: float = REFERENCE_FRACTIONAL_BANDWIDTH,
                     fs: float = 50e6) -> np.ndarray:
    """Sampled, zero-phase detector response (odd length, centered).

    Normalized to unit spectral magnitude at ``center_freq``.
    """
    _check_pulse_args(center_freq, fractional_bandwidth, fs)
    sigma = _pulse_sigma(center_freq, fractional_bandwidth)
    halflength = _pulse_halflength(sigma)
    n_half = int(math.floor(halflength * fs))
    t = np.arange(-n_half, n_half + 1) / fs
    kernel = _pulse(t, center_freq, sigma, halflength)
    gain = abs(np.sum(kernel * np.exp(-2j * math.pi * center_freq * t)))
    return kernel / gain


def simulate_channels(phantom: Phantom, geometry: ArrayGeometry, acq: AcquisitionParams,
                      center_freq: float = REFERENCE_CENTER_FREQUENCY,
                      fractional_bandwidth: float = REFERENCE_FRACTIONAL_BANDWIDTH) -> ChannelDataSet:
    """Noise-free channel data, linear in the absorber amplitudes.

    Each element receives the sum over absorbers of the N-wave at the
    element-to-center distance, filtered by the detector response. The sampled
    kernel of :func:`impulse_response` and the continuous pulse share the same
    shape and normalization.
    """
    fs, c, T = acq.sampling_rate, acq.sound_speed, acq.num_samples
    _check_pulse_args(center_freq, fractional_bandwidth, fs)
    sigma = _pulse_sigma(center_freq, fractional_bandwidth)
    halflength = _pulse_halflength(sigma)
    n_half = int(math.floor(halflength * fs))
    t_kernel = np.arange(-n_half, n_half + 1) / fs
    gain = abs(np.sum(_pulse(t_kernel, center_freq, sigma, halflength)
                      * np.exp(-2j * math.pi * center_freq * t_kernel)))

    element_x = geometry.element_x
    out = np.zeros((geometry.num_elements, T))
    # midpoint nodes on [-1, 1]
    nodes = (np.arange(NWAVE_QUADRATURE) + 0.5) / NWAVE_QUADRATURE * 2.0 - 1.0
    truncated = False
    for absorber in phantom.absorbers:
        x0, z0 = absorber.center
        a, p0 = absorber.radius, absorber.amplitude
        distances = np.hypot(element_x - x0, z0)
        if np.any(distances <= a):
            raise ValueError("an element lies inside an absorber")
        for i, R in enumerate(distances):
            tau = (R + a * nodes) / c
            if tau[0] < 0:
                raise ValueError("negative arrival time")
            pressure = nwave_pressure(R, a, p0, tau, c)
            k_lo = max(0, int(math.floor(((R - a) / c - halflength) * fs)))
            k_hi = int(math.ceil(((R + a) / c + halflength) * fs))
            if k_hi > T - 1:
                truncated = True
                k_hi = T - 1
            if k_hi < k_lo:
                continue
            t = np.arange(k_lo, k_hi + 1) / fs
            response = _pulse(t[:, None] - tau[None, :], center_freq, sigma, halflength)
            # fs * integral, so amplitudes match a discrete convolution with the sampled kernel
            dtau = 2.0 * a / c / NWAVE_QUADRATURE
            out[i, k_lo:k_hi + 1] += fs * dtau * (response @ pressure) / gain
    if truncated:
        warnings.warn("absorber signal extends beyond the recorded samples; channel data truncated",
                      RuntimeWarning, stacklevel=2)
    return ChannelDataSet(out, acq, geometry)


def signal_support(clean: np.ndarray) -> np.ndarray:
    peak = np.max(np.abs(clean))
    return np.abs(clean) > SUPPORT_FRACTION * peak


def add_noise(channels: ChannelDataSet, spec: NoiseSpec) -> ChannelDataSet:
    """Add white Gaussian noise at ``spec.target_snr_db`` relative to the signal power.

    Signal power is the mean square over the support of the clean data. Noise
    comes from a PCG64 generator seeded with ``spec.seed`` and is drawn
    element-major, so a seed fully determines the realization.
    """
    if math.isinf(spec.target_snr_db) and spec.target_snr_db > 0:
        return channels
    clean = channels.samples
    if not np.any(clean):
        raise ValueError("cannot set an SNR on all-zero channel data")
    power = float(np.mean(clean[signal_support(clean)] ** 2))
    noise_std = math.sqrt(power / 10.0 ** (spec.target_snr_db / 10.0))
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    noise = rng.standard_normal(clean.shape) * noise_std
    return channels.with_samples(clean + noise)
