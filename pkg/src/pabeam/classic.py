"""Non-adaptive beamformers: delay-and-sum and delay-multiply-and-sum.

All snapshot functions accept a single snapshot of shape ``(M,)`` or a stack
``(..., M)`` and reduce over the last axis.
"""

from __future__ import annotations

from functools import partial

import numpy as np

from . import dsp
from .core import BeamformConfig, ChannelDataSet, ImagingGrid, Method, map_scanlines
from .delay import scanline_snapshots


def das(snapshot: np.ndarray):
    return np.sum(np.asarray(snapshot, dtype=np.float64), axis=-1)


def _signed_root(x: np.ndarray) -> np.ndarray:
    return np.sign(x) * np.sqrt(np.abs(x))


def dmas_terms(snapshot: np.ndarray, mode: str = "pairwise") -> np.ndarray:
    """Rows of the factorized DMAS expansion, ``M-1`` terms per snapshot.

    ``pairwise``: term ``i`` is ``sum_{j>i} sign(x_i x_j) sqrt|x_i x_j|``,
    evaluated as ``u_i * sum_{j>i} u_j`` with ``u = sign(x) sqrt|x|``.
    ``row_product``: term ``i`` is the signed root of ``x_i * sum_{j>i} x_j``.
    """
    x = np.asarray(snapshot, dtype=np.float64)
    if x.shape[-1] < 2:
        raise ValueError("DMAS needs at least two channels")
    if mode == "pairwise":
        u = _signed_root(x)
        # tail[i] = sum_{j>i} u_j, accumulated from the far end
        tail = np.cumsum(u[..., :0:-1], axis=-1)[..., ::-1]
        return u[..., :-1] * tail
    if mode == "row_product":
        tail = np.cumsum(x[..., :0:-1], axis=-1)[..., ::-1]
        return _signed_root(x[..., :-1] * tail)
    raise ValueError(f"unknown dmas_sqrt_mode {mode!r}")


def dmas(snapshot: np.ndarray, mode: str = "pairwise"):
    """DMAS output: the sum of :func:`dmas_terms` in ascending row order."""
    terms = dmas_terms(snapshot, mode)
    out = terms[..., 0].copy()
    for i in range(1, terms.shape[-1]):
        out = out + terms[..., i]
    return out if out.ndim else float(out)


def expansion_identity_check(snapshot: np.ndarray) -> float:
    """Residual between the factorized and pairwise square-root-free DMAS sums.

    Should stay below ``1e-9 * (sum |x|)**2``.
    """
    x = np.asarray(snapshot, dtype=np.float64)
    if x.shape[-1] < 2:
        raise ValueError("need at least two channels")
    tail = np.cumsum(x[:0:-1])[::-1]
    factorized = float(np.sum(x[:-1] * tail))
    pairwise = float(np.sum(np.triu(np.outer(x, x), k=1)))
    return abs(factorized - pairwise)


def filter_lines(lines: np.ndarray, config: BeamformConfig, fs: float, axis: int = -1) -> np.ndarray:
    if not config.filters_output:
        return np.asarray(lines, dtype=np.float64)
    f_lo, f_hi = config.band
    return dsp.bandpass(lines, fs, f_lo, f_hi, config.tukey_alpha, axis=axis)


def _classic_line(col: int, channels: ChannelDataSet, grid: ImagingGrid, config: BeamformConfig) -> np.ndarray:
    depths = grid.rf_depths(channels.acq)
    snaps = scanline_snapshots(channels, grid.lateral_positions[col], depths, config.interpolation)
    if config.method is Method.DAS:
        line = das(snaps)
    else:
        line = dmas(snaps, config.dmas_sqrt_mode)
    return filter_lines(line, config, channels.acq.sampling_rate)


def image_classic(channels: ChannelDataSet, grid: ImagingGrid, config: BeamformConfig, workers: int = 1) -> np.ndarray:
    """Band-passed DAS or DMAS image, shape ``(len(grid.rf_depths), num_lateral)``."""
    if config.method not in (Method.DAS, Method.DMAS):
        raise ValueError(f"image_classic handles DAS and DMAS, not {config.method.value}")
    fn = partial(_classic_line, channels=channels, grid=grid, config=config)
    lines = map_scanlines(fn, range(grid.num_lateral), workers)
    return np.stack(lines, axis=1)
