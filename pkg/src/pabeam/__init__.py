"""Delay-multiply-and-sum and eigenspace minimum-variance beamforming for photoacoustic channel data."""

from .core import (
    AcquisitionParams,
    ArrayGeometry,
    BeamformConfig,
    ChannelDataSet,
    ImagingGrid,
    Method,
    validate_config,
)

__version__ = "0.1.0"

__all__ = [
    "AcquisitionParams",
    "ArrayGeometry",
    "BeamformConfig",
    "ChannelDataSet",
    "ImagingGrid",
    "Method",
    "validate_config",
]
