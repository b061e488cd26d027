"""Point-target image quality: lateral profiles, -6 dB FWHM, SNR and sidelobe level."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ImagingGrid


class MeasurementError(ValueError):
    """A metric is undefined for the given profile or image."""


@dataclass(frozen=True)
class LateralProfile:
    values_db: np.ndarray
    spacing: float
    depth: float

    @property
    def positions(self) -> np.ndarray:
        n = len(self.values_db)
        return (np.arange(n) - (n - 1) / 2.0) * self.spacing


@dataclass(frozen=True)
class Roi:
    """Half-open pixel rectangle ``[row0, row1) x [col0, col1)``."""

    row0: int
    row1: int
    col0: int
    col1: int

    def slices(self) -> tuple[slice, slice]:
        return slice(self.row0, self.row1), slice(self.col0, self.col1)

    def overlaps(self, other: "Roi") -> bool:
        return (self.row0 < other.row1 and other.row0 < self.row1
                and self.col0 < other.col1 and other.col0 < self.col1)


def roi_around(grid: ImagingGrid, lateral: float, depth: float, width: float, height: float) -> Roi:
    """Pixel box of ``width x height`` meters centered on ``(lateral, depth)``, clipped to the grid."""
    r_half = int(round(height / 2 / grid.spacing))
    c_half = int(round(width / 2 / grid.spacing))
    r = grid.row_of_depth(depth)
    c = grid.col_of_lateral(lateral)
    return Roi(max(0, r - r_half), min(grid.num_axial, r + r_half + 1),
               max(0, c - c_half), min(grid.num_lateral, c + c_half + 1))


def lateral_profile(db_image: np.ndarray, grid: ImagingGrid, depth: float) -> LateralProfile:
    """Image row nearest ``depth``, shifted so its maximum is 0 dB."""
    row = np.asarray(db_image, dtype=np.float64)[grid.row_of_depth(depth)]
    return LateralProfile(row - row.max(), grid.spacing, float(depth))


def _peak_index(values: np.ndarray) -> int:
    peak = int(np.argmax(values))
    if peak == 0 or peak == len(values) - 1:
        raise MeasurementError("profile peak lies on the profile edge")
    return peak


def fwhm_minus6db(profile: LateralProfile, level_db: float = -6.0) -> float:
    """Width of the main lobe where it crosses ``level_db`` below the peak.

    Crossings are interpolated linearly in dB between the last sample at or
    above the level and the first sample below it, on each side.
    """
    v = np.asarray(profile.values_db, dtype=np.float64)
    v = v - v.max()
    peak = _peak_index(v)

    left = peak
    while left > 0 and v[left - 1] >= level_db:
        left -= 1
    right = peak
    while right < len(v) - 1 and v[right + 1] >= level_db:
        right += 1
    if left == 0 or right == len(v) - 1:
        raise MeasurementError("main lobe does not fall below the -6 dB level inside the profile")

    def crossing(inside, outside):
        frac = (v[inside] - level_db) / (v[inside] - v[outside])
        return inside + frac * (outside - inside)

    return (crossing(right, right + 1) - crossing(left, left - 1)) * profile.spacing


def snr_db(envelope_image: np.ndarray, signal_roi: Roi, noise_roi: Roi) -> float:
    """``20 log10(peak in signal ROI / std in noise ROI)`` on a linear envelope image."""
    image = np.asarray(envelope_image, dtype=np.float64)
    rows, cols = image.shape
    for name, roi in (("signal", signal_roi), ("noise", noise_roi)):
        if not (0 <= roi.row0 < roi.row1 <= rows and 0 <= roi.col0 < roi.col1 <= cols):
            raise MeasurementError(f"{name} ROI {roi} lies outside the {image.shape} image")
    if signal_roi.overlaps(noise_roi):
        raise MeasurementError("signal and noise ROIs overlap")
    peak = float(np.max(image[signal_roi.slices()]))
    noise = float(np.std(image[noise_roi.slices()]))
    if not noise > 0:
        raise MeasurementError("noise ROI has zero standard deviation")
    return 20.0 * math.log10(peak / noise)


def mainlobe_bounds(values: np.ndarray, floor_db: float = -6.0) -> tuple[int, int]:
    """Indices of the first local minima flanking the peak (or the profile ends).

    The search starts where the profile first drops below ``floor_db`` so a
    shallow notch on top of the main lobe is not mistaken for its edge.
    """
    v = np.asarray(values, dtype=np.float64)
    v = v - v.max()
    peak = _peak_index(v)
    left = peak
    while left > 0 and (v[left] >= floor_db or v[left - 1] < v[left]):
        left -= 1
    right = peak
    while right < len(v) - 1 and (v[right] >= floor_db or v[right + 1] < v[right]):
        right += 1
    return left, right


def sidelobe_level(profile: LateralProfile) -> float:
    """Highest level outside the main lobe, in dB relative to the peak.

    Returns ``-inf`` when the main lobe spans the whole profile.
    """
    v = np.asarray(profile.values_db, dtype=np.float64)
    v = v - v.max()
    left, right = mainlobe_bounds(v)
    outside = np.concatenate([v[:left], v[right + 1:]])
    if outside.size == 0:
        return -math.inf
    return float(outside.max())
