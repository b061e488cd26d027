"""On-disk formats: channel data, PGM/CSV images and the JSON metrics report.

Channel file layout::

    PABEAM-CH v1
    m=<int>
    t=<int>
    fs=<Hz>
    c=<m/s>
    pitch=<m>
    <M*T float32 little-endian, element-major>
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .core import AcquisitionParams, ArrayGeometry, ChannelDataSet

CHANNEL_MAGIC = "PABEAM-CH v1"
_HEADER_KEYS = ("m", "t", "fs", "c", "pitch")


class FormatError(ValueError):
    pass


def channel_bytes(channels: ChannelDataSet) -> bytes:
    acq, geo = channels.acq, channels.geometry
    header = [
        CHANNEL_MAGIC,
        f"m={geo.num_elements}",
        f"t={acq.num_samples}",
        f"fs={acq.sampling_rate!r}",
        f"c={acq.sound_speed!r}",
        f"pitch={geo.pitch!r}",
    ]
    payload = np.ascontiguousarray(channels.samples, dtype="<f4").tobytes()
    return ("\n".join(header) + "\n").encode("ascii") + payload


def write_channels(channels: ChannelDataSet, path) -> None:
    Path(path).write_bytes(channel_bytes(channels))


def parse_channels(data: bytes) -> ChannelDataSet:
    fields = {}
    pos = 0
    for expected in (None,) + _HEADER_KEYS:
        end = data.find(b"\n", pos)
        if end < 0:
            raise FormatError("truncated channel file header")
        line = data[pos:end].decode("ascii", errors="replace")
        pos = end + 1
        if expected is None:
            if line != CHANNEL_MAGIC:
                raise FormatError(f"not a channel file (header {line!r})")
            continue
        key, sep, value = line.partition("=")
        if not sep or key != expected:
            raise FormatError(f"expected '{expected}=' header line, got {line!r}")
        fields[key] = value
    try:
        m, t = int(fields["m"]), int(fields["t"])
        fs, c, pitch = float(fields["fs"]), float(fields["c"]), float(fields["pitch"])
    except ValueError as exc:
        raise FormatError(f"bad header value: {exc}") from None
    payload = data[pos:]
    if len(payload) != 4 * m * t:
        raise FormatError(f"payload has {len(payload)} bytes, expected {4 * m * t}")
    samples = np.frombuffer(payload, dtype="<f4").astype(np.float64).reshape(m, t)
    return ChannelDataSet(samples, AcquisitionParams(fs, c, t), ArrayGeometry(m, pitch))


def read_channels(path) -> ChannelDataSet:
    return parse_channels(Path(path).read_bytes())


def pgm_bytes(db_image: np.ndarray, dynamic_range: float) -> bytes:
    """8-bit binary PGM, ``-dynamic_range`` dB black and 0 dB white."""
    db = np.asarray(db_image, dtype=np.float64)
    if not np.all(np.isfinite(db)):
        raise ValueError("dB image must be finite")
    # round half up
    levels = np.floor(255.0 * (db + dynamic_range) / dynamic_range + 0.5)
    pixels = np.clip(levels, 0, 255).astype(np.uint8)
    rows, cols = pixels.shape
    return f"P5\n{cols} {rows}\n255\n".encode("ascii") + pixels.tobytes()


def csv_text(db_image: np.ndarray) -> str:
    db = np.asarray(db_image, dtype=np.float64)
    return "".join(",".join(f"{v:.6g}" for v in row) + "\n" for row in db)


def export_image(db_image: np.ndarray, path, fmt: str, dynamic_range: float = 60.0) -> None:
    if fmt == "pgm":
        Path(path).write_bytes(pgm_bytes(db_image, dynamic_range))
    elif fmt == "csv":
        Path(path).write_bytes(csv_text(db_image).encode("ascii"))
    else:
        raise ValueError(f"unknown image format {fmt!r}")


def _json_safe(value):
    if isinstance(value, dict):
        return {str(k): _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    if isinstance(value, np.integer):
        return int(value)
    return value


def report_text(report: dict) -> str:
    return json.dumps(_json_safe(report), sort_keys=True, indent=2, allow_nan=False) + "\n"


def report_document(metrics: dict, config_text: str = "", seed: int = 0, conventions: dict | None = None) -> dict:
    doc = {"config": config_text, "methods": metrics, "seed": seed}
    if conventions:
        doc["conventions"] = conventions
    return doc


def write_report(metrics: dict, path, config_text: str = "", seed: int = 0, conventions: dict | None = None) -> None:
    """JSON report: ``{"config": ..., "methods": metrics, "seed": ...}`` with sorted keys."""
    doc = report_document(metrics, config_text, seed, conventions)
    Path(path).write_bytes(report_text(doc).encode("utf-8"))
