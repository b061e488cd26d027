"""EIBMV-DMAS: eigenspace MV applied across the factorized DMAS terms.

Each row of the factorized DMAS expansion is treated as a synthetic channel:
the ``M-1`` term signals of a scanline are band-passed along depth, then the
EIBMV chain replaces their uniform outer sum.
"""

from __future__ import annotations

from functools import partial

import numpy as np

from .adaptive import adaptive_outputs
from .classic import dmas_terms, filter_lines
from .core import BeamformConfig, ChannelDataSet, ImagingGrid, Method, map_scanlines
from .delay import scanline_snapshots


def term_lines(channels: ChannelDataSet, scanline: int, grid: ImagingGrid,
               mode: str = "pairwise", interpolation: str = "linear") -> np.ndarray:
    """DMAS term signals along one scanline, shape ``(M-1, N)``."""
    depths = grid.rf_depths(channels.acq)
    snaps = scanline_snapshots(channels, grid.lateral_positions[scanline], depths, interpolation)
    return dmas_terms(snaps, mode).T


def term_windows(terms: np.ndarray, K: int) -> np.ndarray:
    """Windows of ``2K+1`` neighbouring samples per depth, ``(N, M-1, 2K+1)``.

    Samples beyond either end of the line read as zero.
    """
    padded = np.pad(terms, ((0, 0), (K, K)))
    windows = np.lib.stride_tricks.sliding_window_view(padded, 2 * K + 1, axis=1)
    return np.ascontiguousarray(np.swapaxes(windows, 0, 1))


def eibmv_dmas_line(terms: np.ndarray, config: BeamformConfig, fs: float) -> np.ndarray:
    terms = np.asarray(terms, dtype=np.float64)
    n_terms = terms.shape[0]
    if config.subarray_length > n_terms:
        raise ValueError(f"subarray length {config.subarray_length} exceeds the {n_terms} DMAS terms")
    filtered = filter_lines(terms, config, fs, axis=1)
    windows = term_windows(filtered, config.temporal_half_width)
    return adaptive_outputs(windows, config, eigenspace=True)


def _hybrid_line(col: int, channels: ChannelDataSet, grid: ImagingGrid, config: BeamformConfig) -> np.ndarray:
    terms = term_lines(channels, col, grid, config.dmas_sqrt_mode, config.interpolation)
    return eibmv_dmas_line(terms, config, channels.acq.sampling_rate)


def image_eibmv_dmas(channels: ChannelDataSet, grid: ImagingGrid, config: BeamformConfig, workers: int = 1) -> np.ndarray:
    """EIBMV-DMAS image, shape ``(len(grid.rf_depths), num_lateral)``.

    No band-pass after beamforming: each term was filtered already.
    """
    if config.method is not Method.EIBMV_DMAS:
        raise ValueError(f"image_eibmv_dmas handles EIBMV_DMAS, not {config.method.value}")
    fn = partial(_hybrid_line, channels=channels, grid=grid, config=config)
    return np.stack(map_scanlines(fn, range(grid.num_lateral), workers), axis=1)
