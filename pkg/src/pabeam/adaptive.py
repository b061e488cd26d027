"""Minimum-variance and eigenspace-based minimum-variance beamforming.

Covariances are estimated with forward spatial smoothing over all length-``L``
subarrays and averaged over ``2K+1`` time samples. After delay alignment the
steering vector is all ones, so the MV weights are ``R^-1 1 / (1' R^-1 1)``.
"""

from __future__ import annotations

from functools import partial
from typing import NamedTuple

import numpy as np

from .classic import filter_lines
from .core import BeamformConfig, ChannelDataSet, ImagingGrid, Method, map_scanlines
from .delay import scanline_windows

# Pixels processed per batched linear-algebra call.
BATCH = 256


class EigenPair(NamedTuple):
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def _check_subarray_length(L, channels):
    if int(L) != L or not 1 <= L <= channels:
        raise ValueError(f"subarray length must satisfy 1 <= L <= {channels}, got {L}")


def estimate_covariance(window: np.ndarray, L: int) -> np.ndarray:
    """Spatially smoothed, time-averaged sample covariance.

    Args:
        window: Aligned window ``(M, 2K+1)`` or a stack ``(..., M, 2K+1)``.
        L: Subarray length.

    Returns:
        ``(..., L, L)`` covariance averaged over the ``M-L+1`` subarrays and
        ``2K+1`` columns.
    """
    window = np.asarray(window, dtype=np.float64)
    M, ncols = window.shape[-2:]
    _check_subarray_length(L, M)
    S = M - L + 1
    gram = window @ np.swapaxes(window, -1, -2)
    gram = 0.5 * (gram + np.swapaxes(gram, -1, -2))
    # cumulative sums along each diagonal: acc[p, q] = sum_t gram[p-t, q-t]
    acc = gram.copy()
    for p in range(1, M):
        acc[..., p, 1:] += acc[..., p - 1, :-1]
    R = acc[..., S - 1:, S - 1:].copy()
    R[..., 1:, 1:] -= acc[..., :L - 1, :L - 1]
    return R / (ncols * S)


def diagonal_load(R: np.ndarray, delta: float) -> np.ndarray:
    """``R + delta * trace(R) * I``."""
    if not delta > 0:
        raise ValueError(f"loading factor must be positive, got {delta}")
    R = np.asarray(R, dtype=np.float64)
    eps = delta * np.trace(R, axis1=-2, axis2=-1)
    out = R.copy()
    idx = np.arange(R.shape[-1])
    out[..., idx, idx] += eps[..., None]
    return out


def mv_weights(R_loaded: np.ndarray) -> np.ndarray:
    """Distortionless minimum-variance weights for an all-ones steering vector.

    Raises:
        numpy.linalg.LinAlgError: If the matrix is singular.
    """
    R_loaded = np.asarray(R_loaded, dtype=np.float64)
    ones = np.ones(R_loaded.shape[:-1] + (1,))
    r_inv_a = np.linalg.solve(R_loaded, ones)[..., 0]
    return r_inv_a / np.sum(r_inv_a, axis=-1, keepdims=True)


def _check_symmetric(R, rtol=1e-12):
    scale = np.max(np.abs(R)) if R.size else 0.0
    asym = np.max(np.abs(R - np.swapaxes(R, -1, -2))) if R.size else 0.0
    if asym > rtol * max(scale, np.finfo(float).tiny):
        raise ValueError(f"matrix is not symmetric (max asymmetry {asym:.3g})")


def sym_eig(R: np.ndarray, solver: str = "lapack") -> EigenPair:
    """Eigendecomposition of a symmetric matrix, eigenvalues in descending order.

    ``solver="lapack"`` uses :func:`numpy.linalg.eigh` and handles stacks;
    ``solver="jacobi"`` uses :func:`jacobi_eig` on a single matrix.
    """
    R = np.asarray(R, dtype=np.float64)
    if R.shape[-1] != R.shape[-2]:
        raise ValueError(f"expected a square matrix, got shape {R.shape}")
    _check_symmetric(R)
    if solver == "jacobi":
        return jacobi_eig(R)
    if solver != "lapack":
        raise ValueError(f"unknown eigensolver {solver!r}")
    values, vectors = np.linalg.eigh(R)
    return EigenPair(values[..., ::-1], vectors[..., ::-1])


def jacobi_eig(R: np.ndarray, tol: float = 1e-15, max_sweeps: int = 50) -> EigenPair:
    """Cyclic Jacobi eigensolver for one symmetric matrix.

    Sweeps over all off-diagonal pairs, zeroing each with a plane rotation,
    until the off-diagonal norm falls below ``tol`` times the Frobenius norm.
    """
    A = np.array(R, dtype=np.float64)
    n = A.shape[0]
    V = np.eye(n)
    norm = np.linalg.norm(A)
    for _ in range(max_sweeps):
        off = np.linalg.norm(A - np.diag(np.diag(A)))
        if off <= tol * norm:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0)) if theta != 0 else 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                ap = A[:, p].copy()
                aq = A[:, q].copy()
                A[:, p] = c * ap - s * aq
                A[:, q] = s * ap + c * aq
                rp = A[p, :].copy()
                rq = A[q, :].copy()
                A[p, :] = c * rp - s * rq
                A[q, :] = s * rp + c * rq
                vp = V[:, p].copy()
                V[:, p] = c * vp - s * V[:, q]
                V[:, q] = s * vp + c * V[:, q]
    values = np.diag(A).copy()
    order = np.argsort(values, kind="stable")[::-1]
    return EigenPair(values[order], V[:, order])


def signal_subspace_mask(eigenvalues: np.ndarray, sigma: float) -> np.ndarray:
    """Columns kept for projection: ``lambda >= sigma * lambda_max``, principal always kept."""
    if not 0 <= sigma <= 1:
        raise ValueError(f"sigma must lie in [0, 1], got {sigma}")
    eigenvalues = np.asarray(eigenvalues)
    if sigma == 0:
        return np.ones(eigenvalues.shape, dtype=bool)
    mask = eigenvalues >= sigma * eigenvalues[..., :1]
    mask[..., 0] = True
    return mask


def eibmv_project(w_mv: np.ndarray, eig: EigenPair, sigma: float) -> np.ndarray:
    """Project MV weights onto the dominant eigen-subspace, ``E_s E_s' w``."""
    mask = signal_subspace_mask(eig.eigenvalues, sigma)
    w_mv = np.asarray(w_mv, dtype=np.float64)
    if np.all(mask):
        return w_mv.copy()
    E = eig.eigenvectors
    coeffs = np.einsum("...ji,...j->...i", E, w_mv) * mask
    return np.einsum("...ij,...j->...i", E, coeffs)


def subarray_output(w: np.ndarray, snapshot: np.ndarray, L: int):
    """Weights applied to every length-``L`` subarray, outputs averaged."""
    x = np.asarray(snapshot, dtype=np.float64)
    _check_subarray_length(L, x.shape[-1])
    subarrays = np.lib.stride_tricks.sliding_window_view(x, L, axis=-1)
    out = np.einsum("...l,...sl->...", np.asarray(w, dtype=np.float64), subarrays) / subarrays.shape[-2]
    return out if np.ndim(out) else float(out)


def adaptive_outputs(windows: np.ndarray, config: BeamformConfig, eigenspace: bool) -> np.ndarray:
    """MV or EIBMV output for a stack of aligned windows ``(N, M_ch, 2K+1)``.

    The center column is the snapshot the weights are applied to. Windows
    carrying no energy give zero output (their covariance cannot be loaded).
    """
    N, M_ch, ncols = windows.shape
    L = config.subarray_length
    _check_subarray_length(L, M_ch)
    K = (ncols - 1) // 2
    out = np.zeros(N)
    for start in range(0, N, BATCH):
        block = windows[start:start + BATCH]
        R = estimate_covariance(block, L)
        live = np.trace(R, axis1=-2, axis2=-1) > 0
        if not np.any(live):
            continue
        R = diagonal_load(R[live], config.delta)
        w = mv_weights(R)
        if eigenspace:
            w = eibmv_project(w, sym_eig(R), config.subspace_threshold)
        out[start:start + BATCH][live] = subarray_output(w, block[live, :, K], L)
    return out


def _adaptive_line(col: int, channels: ChannelDataSet, grid: ImagingGrid, config: BeamformConfig) -> np.ndarray:
    depths = grid.rf_depths(channels.acq)
    windows = scanline_windows(channels, grid.lateral_positions[col], depths,
                               config.temporal_half_width, config.interpolation)
    line = adaptive_outputs(windows, config, eigenspace=config.method is Method.EIBMV)
    return filter_lines(line, config, channels.acq.sampling_rate)


def image_adaptive(channels: ChannelDataSet, grid: ImagingGrid, config: BeamformConfig, workers: int = 1) -> np.ndarray:
    """Band-passed MV or EIBMV image, shape ``(len(grid.rf_depths), num_lateral)``."""
    if config.method not in (Method.MV, Method.EIBMV):
        raise ValueError(f"image_adaptive handles MV and EIBMV, not {config.method.value}")
    fn = partial(_adaptive_line, channels=channels, grid=grid, config=config)
    return np.stack(map_scanlines(fn, range(grid.num_lateral), workers), axis=1)
