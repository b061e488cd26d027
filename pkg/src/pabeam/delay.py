"""One-way receive delays and fractional-delay sample extraction."""

from __future__ import annotations

import numpy as np

from .core import ChannelDataSet


def propagation_delay(pixel, element, sound_speed: float):
    """One-way travel time from ``pixel`` to ``element`` (both ``(lateral, axial)``)."""
    if not sound_speed > 0:
        raise ValueError(f"sound_speed must be positive, got {sound_speed}")
    pixel = np.asarray(pixel, dtype=np.float64)
    element = np.asarray(element, dtype=np.float64)
    d = np.hypot(pixel[..., 0] - element[..., 0], pixel[..., 1] - element[..., 1])
    return d / sound_speed if np.ndim(d) else float(d) / sound_speed


def _gather(samples: np.ndarray, index: np.ndarray, kind: str = "linear") -> np.ndarray:
    """Interpolate each row of ``samples`` (M, T) at fractional ``index`` (..., M).

    Taps outside ``[0, T-1]`` read as zero.
    """
    M, T = samples.shape
    rows = np.broadcast_to(np.arange(M), index.shape)
    if kind == "nearest":
        k = np.floor(index + 0.5).astype(np.int64)
        valid = (k >= 0) & (k < T)
        return np.where(valid, samples[rows, np.clip(k, 0, T - 1)], 0.0)
    if kind != "linear":
        raise ValueError(f"unknown interpolation kind {kind!r}")
    k0 = np.floor(index)
    frac = index - k0
    k0 = k0.astype(np.int64)
    k1 = k0 + 1
    v0 = np.where((k0 >= 0) & (k0 < T), samples[rows, np.clip(k0, 0, T - 1)], 0.0)
    v1 = np.where((k1 >= 0) & (k1 < T), samples[rows, np.clip(k1, 0, T - 1)], 0.0)
    # frac == 0 must return the knot exactly
    return np.where(frac == 0.0, v0, v0 + frac * (v1 - v0))


def sample_at(channel: np.ndarray, time: float, fs: float, kind: str = "linear") -> float:
    if time < 0:
        raise ValueError(f"time must be non-negative, got {time}")
    channel = np.asarray(channel, dtype=np.float64)[None, :]
    return float(_gather(channel, np.array([time * fs]), kind)[0])


def _delay_index(channels: ChannelDataSet, lateral: float, depths: np.ndarray) -> np.ndarray:
    """Fractional sample index for every (depth, element), shape (N, M)."""
    ex = channels.geometry.element_x
    depths = np.asarray(depths, dtype=np.float64)
    dist = np.hypot(lateral - ex[None, :], depths[:, None])
    return dist / channels.acq.sound_speed * channels.acq.sampling_rate


def aligned_snapshot(channels: ChannelDataSet, pixel, kind: str = "linear") -> np.ndarray:
    """Per-element samples at the pixel's one-way delays, length ``M``."""
    lateral, depth = pixel
    index = _delay_index(channels, lateral, np.array([depth]))
    return _gather(channels.samples, index, kind)[0]


def aligned_window(channels: ChannelDataSet, pixel, K: int, kind: str = "linear") -> np.ndarray:
    """Aligned snapshots at offsets ``-K..K`` samples, shape ``(M, 2K+1)``."""
    lateral, depth = pixel
    return scanline_windows(channels, lateral, np.array([depth]), K, kind)[0]


def scanline_snapshots(channels: ChannelDataSet, lateral: float, depths: np.ndarray,
                       kind: str = "linear") -> np.ndarray:
    """Aligned snapshots for every depth of one scanline, shape ``(N, M)``."""
    return _gather(channels.samples, _delay_index(channels, lateral, depths), kind)


def scanline_windows(channels: ChannelDataSet, lateral: float, depths: np.ndarray, K: int,
                     kind: str = "linear") -> np.ndarray:
    """Aligned windows for every depth of one scanline, shape ``(N, M, 2K+1)``."""
    if int(K) != K or K < 0:
        raise ValueError(f"K must be an integer >= 0, got {K}")
    index = _delay_index(channels, lateral, depths)
    offsets = np.arange(-K, K + 1, dtype=np.float64)
    # shifting by whole samples keeps the fractional part, so column K equals the snapshot
    shifted = index[:, None, :] + offsets[None, :, None]
    window = _gather(channels.samples, shifted, kind)
    return np.swapaxes(window, 1, 2)
