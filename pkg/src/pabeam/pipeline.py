"""Simulate -> beamform -> postprocess -> measure, with every artifact digested.

Output directory layout::

    config.ini                    config echo (output directory omitted)
    channels.pabeam               channel data actually beamformed
    <method>_raw.npy              beamformed lines at the RF sample rate
    <method>_envelope.npy         envelope on the grid rows
    <method>_db.npy               log-compressed display image
    <method>_db.{pgm,csv}         exported display image
    <method>_profile_<z>mm.csv    lateral profile (lateral_mm,db) per depth
    report.json                   FWHM / SNR / sidelobe per method and depth
    manifest.json                 sha256 of every file above, written last
"""

from __future__ import annotations

import hashlib
import io
import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import dsp, formats
from .adaptive import image_adaptive
from .classic import image_classic
from .config import RunConfig, serialize_config
from .core import BeamformConfig, ChannelDataSet, ImagingGrid, Method
from .hybrid import image_eibmv_dmas
from .metrics import MeasurementError, fwhm_minus6db, lateral_profile, roi_around, sidelobe_level, snr_db
from .synth import Phantom, add_noise, simulate_channels

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_IO = 3
EXIT_NUMERICAL = 4

# metrics see the envelope down to this floor; the display uses the configured range
METRIC_FLOOR_DB = 300.0
SIGNAL_ROI = 2e-3
NOISE_ROI = 4e-3
NOISE_OFFSET = 7e-3

CONVENTIONS = {
    "fwhm_mm": "-6 dB width of the lateral profile through the row nearest each depth",
    "sidelobe_db": "highest profile level outside the first flanking minima below -6 dB",
    "snr_db": ("20 log10(peak envelope in a 2x2 mm box on the target / std of the envelope in a "
               "4x4 mm target-free box at the same depth, 7 mm to the side)"),
}


class PipelineIOError(OSError):
    """Output could not be written; maps to exit code 3."""


@dataclass
class MethodImages:
    raw: np.ndarray
    envelope: np.ndarray
    db: np.ndarray


class ArtifactWriter:
    """Writes files under one directory and remembers their digests."""

    def __init__(self, root: Path):
        self.root = Path(root)
        self.digests: dict[str, str] = {}

    def write(self, name: str, data: bytes) -> Path:
        path = self.root / name
        try:
            path.write_bytes(data)
        except OSError as exc:
            raise PipelineIOError(f"cannot write {path}: {exc}") from exc
        self.digests[name] = hashlib.sha256(data).hexdigest()
        return path

    def write_npy(self, name: str, array: np.ndarray) -> Path:
        buf = io.BytesIO()
        np.save(buf, np.ascontiguousarray(array, dtype=np.float64), allow_pickle=False)
        return self.write(name, buf.getvalue())

    def write_manifest(self, methods: dict, seed: int) -> Path:
        doc = {"files": dict(sorted(self.digests.items())), "methods": methods, "seed": seed}
        data = formats.report_text(doc).encode("utf-8")
        # write then rename, so a failure never leaves a partial manifest behind
        tmp = self.root / ".manifest.json.tmp"
        try:
            tmp.write_bytes(data)
            os.replace(tmp, self.root / "manifest.json")
        except OSError as exc:
            raise PipelineIOError(f"cannot write manifest: {exc}") from exc
        return self.root / "manifest.json"


def prepare_output(directory) -> Path:
    """Create ``directory`` and prove it is writable before any work starts."""
    root = Path(directory)
    try:
        root.mkdir(parents=True, exist_ok=True)
        with tempfile.TemporaryFile(dir=root):
            pass
    except OSError as exc:
        raise PipelineIOError(f"output directory {root} is not writable: {exc}") from exc
    return root


def acquire(cfg: RunConfig) -> ChannelDataSet:
    """Simulated noisy channel data, or the file named by ``cfg.channel_data`` as-is.

    Imported data is assumed to carry its own noise, so none is added.
    """
    if cfg.channel_data is not None:
        try:
            return formats.read_channels(cfg.channel_data)
        except OSError as exc:
            raise PipelineIOError(f"cannot read {cfg.channel_data}: {exc}") from exc
    channels = simulate_channels(cfg.phantom, cfg.geometry, cfg.acq,
                                 cfg.center_frequency, cfg.fractional_bandwidth)
    return add_noise(channels, cfg.noise)


def beamform(channels: ChannelDataSet, grid: ImagingGrid, config: BeamformConfig, workers: int = 1) -> np.ndarray:
    if config.method in (Method.DAS, Method.DMAS):
        return image_classic(channels, grid, config, workers)
    if config.method in (Method.MV, Method.EIBMV):
        return image_adaptive(channels, grid, config, workers)
    return image_eibmv_dmas(channels, grid, config, workers)


def postprocess(raw: np.ndarray, channels: ChannelDataSet, grid: ImagingGrid, dynamic_range: float) -> MethodImages:
    if not np.all(np.isfinite(raw)):
        raise FloatingPointError("beamformed image contains non-finite values")
    env_rf = dsp.envelope(raw, axis=0)
    env = dsp.resample_rows(env_rf, grid.rf_depths(channels.acq), grid.axial_positions)
    return MethodImages(raw, env, dsp.log_compress(env, dynamic_range))


def _target_lateral(phantom: Phantom, depth: float) -> float:
    if not phantom.absorbers:
        return 0.0
    nearest = min(phantom.absorbers, key=lambda a: abs(a.center[1] - depth))
    return float(nearest.center[0])


def _noise_center(grid: ImagingGrid, lateral: float) -> float:
    half = grid.lateral_extent / 2
    right, left = lateral + NOISE_OFFSET, lateral - NOISE_OFFSET
    if right + NOISE_ROI / 2 <= half + 1e-12:
        return right
    if left - NOISE_ROI / 2 >= -half - 1e-12:
        return left
    raise MeasurementError("no room for a noise ROI beside the target")


def depth_key(depth: float) -> str:
    return f"{depth * 1e3:g}"


def measure(envelope: np.ndarray, grid: ImagingGrid, phantom: Phantom, depths) -> dict:
    """Per-depth FWHM (mm), SNR (dB) and sidelobe level (dB); ``None`` where undefined."""
    metric_db = dsp.log_compress(envelope, METRIC_FLOOR_DB)
    out = {"fwhm_mm": {}, "snr_db": {}, "sidelobe_db": {}}
    for depth in depths:
        key = depth_key(depth)
        profile = lateral_profile(metric_db, grid, depth)
        try:
            out["fwhm_mm"][key] = fwhm_minus6db(profile) * 1e3
        except MeasurementError:
            out["fwhm_mm"][key] = None
        try:
            out["sidelobe_db"][key] = sidelobe_level(profile)
        except MeasurementError:
            out["sidelobe_db"][key] = None
        try:
            x = _target_lateral(phantom, depth)
            signal = roi_around(grid, x, depth, SIGNAL_ROI, SIGNAL_ROI)
            noise = roi_around(grid, _noise_center(grid, x), depth, NOISE_ROI, NOISE_ROI)
            out["snr_db"][key] = snr_db(envelope, signal, noise)
        except (MeasurementError, ValueError):
            out["snr_db"][key] = None
    return out


def profile_csv(db_image: np.ndarray, grid: ImagingGrid, depth: float) -> bytes:
    row = db_image[grid.row_of_depth(depth)]
    lines = ["lateral_mm,db"]
    lines += [f"{x * 1e3:.6g},{v:.6g}" for x, v in zip(grid.lateral_positions, row)]
    return ("\n".join(lines) + "\n").encode("ascii")


def export_method(writer: ArtifactWriter, method: Method, images: MethodImages, cfg: RunConfig) -> None:
    stem = method.value.lower()
    writer.write_npy(f"{stem}_raw.npy", images.raw)
    writer.write_npy(f"{stem}_envelope.npy", images.envelope)
    writer.write_npy(f"{stem}_db.npy", images.db)
    dr = cfg.beamform.dynamic_range
    for fmt in cfg.formats:
        if fmt == "pgm":
            writer.write(f"{stem}_db.pgm", formats.pgm_bytes(images.db, dr))
        else:
            writer.write(f"{stem}_db.csv", formats.csv_text(images.db).encode("ascii"))
    for depth in cfg.profile_depths:
        writer.write(f"{stem}_profile_{depth_key(depth)}mm.csv", profile_csv(images.db, cfg.grid, depth))


def reconstruct(channels: ChannelDataSet, cfg: RunConfig, method: Method, workers: int = 1) -> MethodImages:
    config = cfg.method_config(method)
    raw = beamform(channels, cfg.grid, config, workers)
    return postprocess(raw, channels, cfg.grid, config.dynamic_range)


@dataclass
class PipelineResult:
    manifest: dict
    manifest_path: Path
    report: dict

    @property
    def exit_code(self) -> int:
        failed = any(m["status"] != "ok" for m in self.manifest["methods"].values())
        return EXIT_NUMERICAL if failed else EXIT_OK


def run_pipeline(cfg: RunConfig, workers: int = 1) -> PipelineResult:
    """Run every configured method and write all artifacts plus the manifest.

    A method that fails numerically is marked ``failed`` in the manifest and
    the run continues; :attr:`PipelineResult.exit_code` is then 4.

    Raises:
        PipelineIOError: The output directory or an artifact cannot be written.
    """
    root = prepare_output(cfg.output_dir)
    writer = ArtifactWriter(root)
    config_text = serialize_config(cfg, include_directory=False)
    writer.write("config.ini", config_text.encode("utf-8"))

    channels = acquire(cfg)
    writer.write("channels.pabeam", formats.channel_bytes(channels))

    statuses, metrics = {}, {}
    for method in cfg.methods:
        try:
            images = reconstruct(channels, cfg, method, workers)
        except (np.linalg.LinAlgError, FloatingPointError, ValueError) as exc:
            statuses[method.value] = {"status": "failed", "error": str(exc)}
            continue
        export_method(writer, method, images, cfg)
        metrics[method.value] = measure(images.envelope, cfg.grid, cfg.phantom, cfg.profile_depths)
        statuses[method.value] = {"status": "ok"}

    report = formats.report_document(metrics, config_text, cfg.noise.seed, CONVENTIONS)
    writer.write("report.json", formats.report_text(report).encode("utf-8"))
    path = writer.write_manifest(statuses, cfg.noise.seed)
    manifest = {"files": dict(sorted(writer.digests.items())), "methods": statuses, "seed": cfg.noise.seed}
    return PipelineResult(manifest, path, report)


def verify_manifest(directory) -> list[str]:
    """Names of manifest entries that are missing or whose digest differs."""
    root = Path(directory)
    manifest = json.loads((root / "manifest.json").read_text())
    bad = []
    for name, digest in manifest["files"].items():
        path = root / name
        if not path.is_file() or hashlib.sha256(path.read_bytes()).hexdigest() != digest:
            bad.append(name)
    return bad

