"""Domain types shared by the simulation, beamforming and metrics modules.

Coordinates are 2D ``(lateral, axial)`` in meters. The transducer lies on the
``axial = 0`` line, centered on the lateral origin, and depth grows with the
axial coordinate.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

REFERENCE_NUM_ELEMENTS = 128
DEFAULT_PITCH = 0.15e-3
FINE_SPACING = 0.1e-3
COARSE_SPACING = 0.2e-3


class Method(str, enum.Enum):
    DAS = "DAS"
    DMAS = "DMAS"
    MV = "MV"
    EIBMV = "EIBMV"
    EIBMV_DMAS = "EIBMV_DMAS"

    @classmethod
    def parse(cls, name: str) -> "Method":
        try:
            return cls(name.strip().upper().replace("-", "_"))
        except ValueError:
            raise ValueError(f"unknown beamforming method {name!r}") from None


@dataclass(frozen=True)
class ArrayGeometry:
    """Uniform linear array of point elements.

    Args:
        num_elements: Number of elements ``M``.
        pitch: Element spacing in meters.
    """

    num_elements: int = REFERENCE_NUM_ELEMENTS
    pitch: float = DEFAULT_PITCH

    def __post_init__(self):
        if int(self.num_elements) != self.num_elements or self.num_elements < 2:
            raise ValueError(f"num_elements must be an integer >= 2, got {self.num_elements}")
        if not self.pitch > 0:
            raise ValueError(f"pitch must be positive, got {self.pitch}")

    @property
    def element_x(self) -> np.ndarray:
        """Lateral coordinates of all elements, shape ``(M,)``."""
        idx = np.arange(self.num_elements, dtype=np.float64)
        return (idx - (self.num_elements - 1) / 2.0) * self.pitch

    @property
    def aperture(self) -> float:
        return (self.num_elements - 1) * self.pitch


@dataclass(frozen=True)
class AcquisitionParams:
    sampling_rate: float = 50e6
    sound_speed: float = 1540.0
    num_samples: int = 2048

    def __post_init__(self):
        if not self.sampling_rate > 0:
            raise ValueError(f"sampling_rate must be positive, got {self.sampling_rate}")
        if not self.sound_speed > 0:
            raise ValueError(f"sound_speed must be positive, got {self.sound_speed}")
        if int(self.num_samples) != self.num_samples or self.num_samples < 1:
            raise ValueError(f"num_samples must be an integer >= 1, got {self.num_samples}")


@dataclass(frozen=True, eq=False)
class ChannelDataSet:
    """Received channel data, one row per element.

    The sample matrix is copied and frozen on construction so a data set can be
    handed to worker processes without defensive copies.
    """

    samples: np.ndarray
    acq: AcquisitionParams
    geometry: ArrayGeometry

    def __post_init__(self):
        data = np.array(self.samples, dtype=np.float64, copy=True)
        expected = (self.geometry.num_elements, self.acq.num_samples)
        if data.shape != expected:
            raise ValueError(f"samples have shape {data.shape}, expected {expected}")
        if not np.all(np.isfinite(data)):
            raise ValueError("channel samples must be finite")
        data.setflags(write=False)
        object.__setattr__(self, "samples", data)

    def with_samples(self, samples: np.ndarray) -> "ChannelDataSet":
        return ChannelDataSet(samples, self.acq, self.geometry)


@dataclass(frozen=True)
class ImagingGrid:
    """Rectangular pixel lattice centered laterally on the array.

    ``spacing`` is the (isotropic) pixel pitch of the output images. Beamformed
    lines are computed at the channel sampling rate along depth and resampled
    onto the grid rows after envelope detection (see :func:`rf_depths`).
    """

    lateral_extent: float = 20e-3
    axial_range: tuple[float, float] = (0.0, 50e-3)
    spacing: float = FINE_SPACING

    def __post_init__(self):
        z0, z1 = self.axial_range
        if not self.spacing > 0:
            raise ValueError(f"spacing must be positive, got {self.spacing}")
        if z0 < 0:
            raise ValueError(f"axial start must be >= 0, got {z0}")
        if z1 < z0:
            raise ValueError(f"axial range {self.axial_range} is reversed")
        if self.lateral_extent < 0:
            raise ValueError(f"lateral_extent must be >= 0, got {self.lateral_extent}")
        object.__setattr__(self, "axial_range", (float(z0), float(z1)))

    @classmethod
    def fine(cls) -> "ImagingGrid":
        return cls(spacing=FINE_SPACING)

    @classmethod
    def coarse(cls) -> "ImagingGrid":
        return cls(spacing=COARSE_SPACING)

    @property
    def num_lateral(self) -> int:
        return int(math.floor(self.lateral_extent / self.spacing + 1e-9)) + 1

    @property
    def num_axial(self) -> int:
        z0, z1 = self.axial_range
        return int(math.floor((z1 - z0) / self.spacing + 1e-9)) + 1

    @property
    def shape(self) -> tuple[int, int]:
        return (self.num_axial, self.num_lateral)

    @property
    def lateral_positions(self) -> np.ndarray:
        return -self.lateral_extent / 2 + np.arange(self.num_lateral) * self.spacing

    @property
    def axial_positions(self) -> np.ndarray:
        return self.axial_range[0] + np.arange(self.num_axial) * self.spacing

    def rf_depths(self, acq: AcquisitionParams) -> np.ndarray:
        """Depths of beamformed line samples: one per channel sample period.

        A one-way delay step of ``1/fs`` corresponds to ``c/fs`` of depth, so a
        line sampled this way is a time series at ``fs`` and can be band-passed
        with the acquisition's own frequency axis.
        """
        z0, z1 = self.axial_range
        dz = acq.sound_speed / acq.sampling_rate
        n = int(math.floor((z1 - z0) / dz + 1e-9)) + 1
        return z0 + np.arange(n) * dz

    def row_of_depth(self, depth: float) -> int:
        z0, z1 = self.axial_range
        tol = 1e-9 * max(1.0, abs(z1))
        if depth < z0 - tol or depth > z1 + tol:
            raise ValueError(f"depth {depth} m is outside the axial range {self.axial_range}")
        return min(self.num_axial - 1, max(0, int(round((depth - z0) / self.spacing))))

    def col_of_lateral(self, lateral: float) -> int:
        half = self.lateral_extent / 2
        if abs(lateral) > half + 1e-9 * max(1.0, half):
            raise ValueError(f"lateral position {lateral} m is outside the grid")
        return min(self.num_lateral - 1, max(0, int(round((lateral + half) / self.spacing))))


@dataclass(frozen=True)
class BeamformConfig:
    """Method selector and adaptive/filter parameters.

    ``loading_factor=None`` means the default ``1/(10 L)``. The band-pass
    targets the second harmonic band of the DMAS family; ``bandpass_scope``
    selects whether DAS/MV/EIBMV lines are filtered too (``"all"``) or left at
    their native band (``"dmas"``). ``filtering=False`` disables every
    band-pass stage.
    """

    method: Method = Method.DAS
    subarray_length: int = REFERENCE_NUM_ELEMENTS // 2
    temporal_half_width: int = 5
    subspace_threshold: float = 0.5
    loading_factor: float | None = None
    band: tuple[float, float] = (4e6, 12e6)
    tukey_alpha: float = 0.5
    dynamic_range: float = 60.0
    dmas_sqrt_mode: str = "pairwise"
    interpolation: str = "linear"
    filtering: bool = True
    bandpass_scope: str = "dmas"

    def __post_init__(self):
        object.__setattr__(self, "method", Method.parse(self.method) if isinstance(self.method, str) else self.method)
        object.__setattr__(self, "band", (float(self.band[0]), float(self.band[1])))

    @property
    def filters_output(self) -> bool:
        """Whether the beamformed line (or, for the hybrid, each term) is band-passed."""
        if not self.filtering:
            return False
        return self.bandpass_scope == "all" or self.method in (Method.DMAS, Method.EIBMV_DMAS)

    @property
    def delta(self) -> float:
        if self.loading_factor is not None:
            return self.loading_factor
        return 1.0 / (10 * self.subarray_length)

    @classmethod
    def reference_default(cls, method: Method | str = Method.DAS, geometry: ArrayGeometry | None = None, **overrides):
        geometry = geometry or ArrayGeometry()
        kwargs = dict(method=method, subarray_length=geometry.num_elements // 2)
        kwargs.update(overrides)
        return cls(**kwargs)


@dataclass(frozen=True)
class Violation:
    field: str
    message: str


DMAS_SQRT_MODES = ("pairwise", "row_product")
INTERPOLATION_KINDS = ("linear", "nearest")
BANDPASS_SCOPES = ("dmas", "all")


def beamforming_channels(method: Method, geometry: ArrayGeometry) -> int:
    """Channel count the adaptive stage sees: elements, or DMAS terms for the hybrid."""
    if method is Method.EIBMV_DMAS:
        return geometry.num_elements - 1
    return geometry.num_elements


def validate_config(config: BeamformConfig, geometry: ArrayGeometry, acq: AcquisitionParams) -> list[Violation]:
    violations = []

    def bad(name, message):
        violations.append(Violation(name, message))

    channels = beamforming_channels(config.method, geometry)
    L = config.subarray_length
    if int(L) != L or not 1 <= L <= channels:
        bad("subarray_length", f"must satisfy 1 <= L <= {channels}, got {L}")
    K = config.temporal_half_width
    if int(K) != K or K < 0:
        bad("temporal_half_width", f"must be an integer >= 0, got {K}")
    if not 0 <= config.subspace_threshold <= 1:
        bad("subspace_threshold", f"must lie in [0, 1], got {config.subspace_threshold}")
    if config.loading_factor is not None and not config.loading_factor > 0:
        bad("loading_factor", f"must be positive, got {config.loading_factor}")
    f_lo, f_hi = config.band
    if not 0 < f_lo < f_hi < acq.sampling_rate / 2:
        bad("band", f"need 0 < f_lo < f_hi < fs/2 = {acq.sampling_rate / 2:g} Hz, got ({f_lo:g}, {f_hi:g})")
    if not 0 <= config.tukey_alpha <= 1:
        bad("tukey_alpha", f"must lie in [0, 1], got {config.tukey_alpha}")
    if not config.dynamic_range > 0:
        bad("dynamic_range", f"must be positive, got {config.dynamic_range}")
    if config.dmas_sqrt_mode not in DMAS_SQRT_MODES:
        bad("dmas_sqrt_mode", f"must be one of {DMAS_SQRT_MODES}, got {config.dmas_sqrt_mode!r}")
    if config.interpolation not in INTERPOLATION_KINDS:
        bad("interpolation", f"must be one of {INTERPOLATION_KINDS}, got {config.interpolation!r}")
    if config.bandpass_scope not in BANDPASS_SCOPES:
        bad("bandpass_scope", f"must be one of {BANDPASS_SCOPES}, got {config.bandpass_scope!r}")
    return violations


def element_position(index: int, geometry: ArrayGeometry) -> tuple[float, float]:
    if not 0 <= index < geometry.num_elements:
        raise ValueError(f"element index {index} out of range [0, {geometry.num_elements})")
    return ((index - (geometry.num_elements - 1) / 2.0) * geometry.pitch, 0.0)


def pixel_position(row: int, col: int, grid: ImagingGrid) -> tuple[float, float]:
    if not (0 <= row < grid.num_axial and 0 <= col < grid.num_lateral):
        raise ValueError(f"pixel ({row}, {col}) outside grid of shape {grid.shape}")
    return (-grid.lateral_extent / 2 + col * grid.spacing, grid.axial_range[0] + row * grid.spacing)


def map_scanlines(fn: Callable[[int], np.ndarray], columns: Sequence[int], workers: int = 1) -> list[np.ndarray]:
    """Evaluate ``fn`` on every scanline index, in order.

    Scanlines are independent, so results do not depend on ``workers``.
    ``fn`` must be picklable when ``workers > 1``.
    """
    if workers <= 1 or len(columns) <= 1:
        return [fn(col) for col in columns]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, columns, chunksize=max(1, len(columns) // (4 * workers))))
