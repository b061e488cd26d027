"""Band-pass filtering, envelope detection and log compression."""

from __future__ import annotations

import numpy as np
from scipy.signal import hilbert
from scipy.signal.windows import tukey


def tukey_window(n: int, alpha: float) -> np.ndarray:
    """Tukey taper with cosine ramps over ``alpha/2`` of each end.

    ``alpha=0`` is rectangular, ``alpha=1`` is Hann.
    """
    if int(n) != n or n < 1:
        raise ValueError(f"window length must be an integer >= 1, got {n}")
    if not 0 <= alpha <= 1:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    return tukey(int(n), alpha, sym=True)


def bandpass_response(n: int, fs: float, f_lo: float, f_hi: float, alpha: float) -> np.ndarray:
    """Real weights on the ``rfft`` bins of a length-``n`` signal."""
    if not 0 < f_lo < f_hi < fs / 2:
        raise ValueError(f"band ({f_lo:g}, {f_hi:g}) Hz must satisfy 0 < f_lo < f_hi < fs/2 = {fs / 2:g}")
    freqs = np.fft.rfftfreq(n, d=1.0 / fs)
    in_band = (freqs >= f_lo) & (freqs <= f_hi)
    weights = np.zeros(freqs.shape)
    count = int(np.count_nonzero(in_band))
    if count:
        weights[in_band] = tukey_window(count, alpha)
    return weights


def bandpass(line: np.ndarray, fs: float, f_lo: float, f_hi: float, alpha: float, axis: int = -1) -> np.ndarray:
    """Zero-phase band-pass by weighting the spectrum with a Tukey taper over the band.

    Bins outside ``[f_lo, f_hi]`` are zeroed. Works along ``axis`` of an array of lines.
    """
    line = np.asarray(line, dtype=np.float64)
    n = line.shape[axis]
    weights = bandpass_response(n, fs, f_lo, f_hi, alpha)
    shape = [1] * line.ndim
    shape[axis] = weights.size
    spectrum = np.fft.rfft(line, axis=axis) * weights.reshape(shape)
    return np.fft.irfft(spectrum, n=n, axis=axis)


def envelope(line: np.ndarray, axis: int = -1) -> np.ndarray:
    """Magnitude of the analytic signal along ``axis``."""
    line = np.asarray(line, dtype=np.float64)
    if line.shape[axis] < 2:
        raise ValueError("envelope needs at least 2 samples")
    return np.abs(hilbert(line, axis=axis))


def log_compress(image: np.ndarray, dynamic_range: float) -> np.ndarray:
    """``20 log10(v / max)`` clamped below at ``-dynamic_range`` dB."""
    if not dynamic_range > 0:
        raise ValueError(f"dynamic_range must be positive, got {dynamic_range}")
    image = np.asarray(image, dtype=np.float64)
    peak = image.max() if image.size else 0.0
    if not peak > 0:
        raise ValueError("log compression needs an image with a positive maximum")
    with np.errstate(divide="ignore"):
        db = 20.0 * np.log10(np.maximum(image, 0.0) / peak)
    return np.maximum(db, -dynamic_range)


def resample_rows(image: np.ndarray, src_depths: np.ndarray, dst_depths: np.ndarray) -> np.ndarray:
    """Linear interpolation of every column from ``src_depths`` onto ``dst_depths``.

    Depths outside the source range take the nearest edge row.
    """
    image = np.asarray(image, dtype=np.float64)
    src = np.asarray(src_depths, dtype=np.float64)
    dst = np.asarray(dst_depths, dtype=np.float64)
    if image.shape[0] != src.size:
        raise ValueError(f"image has {image.shape[0]} rows but {src.size} source depths")
    pos = np.interp(dst, src, np.arange(src.size, dtype=np.float64))
    lo = np.clip(np.floor(pos).astype(np.int64), 0, max(src.size - 2, 0))
    hi = np.minimum(lo + 1, src.size - 1)
    frac = (pos - lo)[:, None]
    return image[lo] * (1.0 - frac) + image[hi] * frac
