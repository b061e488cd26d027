"""INI run configuration.

Sections and keys (all optional; omitted keys take the reference defaults)::

    [array]        elements, pitch, center_frequency, fractional_bandwidth
    [acquisition]  sampling_rate, sound_speed, samples, channel_data
    [phantom]      lateral, depths, radius, amplitude
    [noise]        snr_db, seed
    [beamform]     method, subarray_length, temporal_half_width, sigma,
                   delta, band_low, band_high, tukey_alpha, dynamic_range,
                   dmas_sqrt_mode, interpolation, filtering, bandpass_scope
    [output]       directory, formats, profile_depths, grid, spacing,
                   lateral_extent, axial_start, axial_end

Lengths are in meters, frequencies in Hz. List values are comma separated.
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass
from pathlib import Path

from .core import (
    COARSE_SPACING,
    FINE_SPACING,
    AcquisitionParams,
    ArrayGeometry,
    BeamformConfig,
    ImagingGrid,
    Method,
    validate_config,
)
from .synth import REFERENCE_CENTER_FREQUENCY, REFERENCE_FRACTIONAL_BANDWIDTH, Absorber, NoiseSpec, Phantom

IMAGE_FORMATS = ("pgm", "csv")
GRID_MODES = {"fine": FINE_SPACING, "coarse": COARSE_SPACING}


class ConfigError(ValueError):
    """Raised for syntax errors, unknown keys/values and invariant violations.

    ``fields`` names the offending keys when known.
    """

    def __init__(self, message, fields=()):
        super().__init__(message)
        self.fields = tuple(fields)


@dataclass(frozen=True)
class RunConfig:
    phantom: Phantom = dataclasses.field(default_factory=Phantom.reference_default)
    geometry: ArrayGeometry = dataclasses.field(default_factory=ArrayGeometry)
    acq: AcquisitionParams = dataclasses.field(default_factory=AcquisitionParams)
    noise: NoiseSpec = dataclasses.field(default_factory=NoiseSpec)
    methods: tuple[Method, ...] = tuple(Method)
    beamform: BeamformConfig = dataclasses.field(default_factory=BeamformConfig)
    grid: ImagingGrid = dataclasses.field(default_factory=ImagingGrid)
    grid_mode: str = "fine"
    output_dir: Path = Path("pabeam_out")
    formats: tuple[str, ...] = IMAGE_FORMATS
    profile_depths: tuple[float, ...] = (35e-3, 45e-3)
    center_frequency: float = REFERENCE_CENTER_FREQUENCY
    fractional_bandwidth: float = REFERENCE_FRACTIONAL_BANDWIDTH
    channel_data: Path | None = None

    def method_config(self, method: Method) -> BeamformConfig:
        return dataclasses.replace(self.beamform, method=method)

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)


def _floats(text):
    return tuple(float(v) for v in text.split(",") if v.strip())


def _bool(text):
    value = text.strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _int(text):
    try:
        return int(text.strip())
    except ValueError:
        pass
    value = float(text)
    if value != int(value):
        raise ValueError(f"not an integer: {text!r}")
    return int(value)


def _optional_float(text):
    return None if text.strip().lower() in ("auto", "") else float(text)


def _methods(text):
    names = [v for v in (p.strip() for p in text.split(",")) if v]
    return tuple(Method.parse(n) for n in names)


def _formats(text):
    fmts = tuple(v.strip().lower() for v in text.split(",") if v.strip())
    for f in fmts:
        if f not in IMAGE_FORMATS:
            raise ValueError(f"unknown image format {f!r}")
    return fmts


def _choice(options):
    def parse(text):
        value = text.strip()
        if value not in options:
            raise ValueError(f"must be one of {tuple(options)}, got {value!r}")
        return value
    return parse


SCHEMA = {
    "array": {
        "elements": _int,
        "pitch": float,
        "center_frequency": float,
        "fractional_bandwidth": float,
    },
    "acquisition": {
        "sampling_rate": float,
        "sound_speed": float,
        "samples": _int,
        "channel_data": str,
    },
    "phantom": {
        "lateral": _floats,
        "depths": _floats,
        "radius": _floats,
        "amplitude": _floats,
    },
    "noise": {
        "snr_db": float,
        "seed": _int,
    },
    "beamform": {
        "method": _methods,
        "subarray_length": _int,
        "temporal_half_width": _int,
        "sigma": float,
        "delta": _optional_float,
        "band_low": float,
        "band_high": float,
        "tukey_alpha": float,
        "dynamic_range": float,
        "dmas_sqrt_mode": str,
        "interpolation": str,
        "filtering": _bool,
        "bandpass_scope": str,
    },
    "output": {
        "directory": str,
        "formats": _formats,
        "profile_depths": _floats,
        "grid": _choice(GRID_MODES),
        "spacing": float,
        "lateral_extent": float,
        "axial_start": float,
        "axial_end": float,
    },
}


def _read(text):
    parser = configparser.ConfigParser(interpolation=None, strict=True, empty_lines_in_values=False,
                                       inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError(f"line {exc.lineno}: key outside of any section: {exc.line.strip()!r}") from None
    except configparser.ParsingError as exc:
        lineno, line = exc.errors[0]
        raise ConfigError(f"line {lineno}: cannot parse {line.strip()!r}") from None
    except configparser.DuplicateOptionError as exc:
        raise ConfigError(f"line {exc.lineno}: duplicate key '{exc.option}' in [{exc.section}]",
                          [f"{exc.section}.{exc.option}"]) from None
    except configparser.DuplicateSectionError as exc:
        raise ConfigError(f"line {exc.lineno}: duplicate section [{exc.section}]", [exc.section]) from None
    values = {}
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]", [section])
        for key, raw in parser.items(section):
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown key '{key}' in [{section}]", [f"{section}.{key}"])
            try:
                values[(section, key)] = SCHEMA[section][key](raw)
            except ValueError as exc:
                raise ConfigError(f"[{section}] {key}: invalid value {raw!r} ({exc})", [f"{section}.{key}"]) from None
    return values


def _broadcast(name, values, n):
    if len(values) == 1:
        return values * n
    if len(values) != n:
        raise ConfigError(f"[phantom] {name} needs 1 or {n} values, got {len(values)}", [f"phantom.{name}"])
    return values


def parse_config(text: str) -> RunConfig:
    """Parse a configuration document into a validated :class:`RunConfig`."""
    v = _read(text)
    get = lambda section, key, default: v.get((section, key), default)  # noqa: E731
    base = RunConfig()

    try:
        geometry = ArrayGeometry(get("array", "elements", base.geometry.num_elements),
                                 get("array", "pitch", base.geometry.pitch))
        acq = AcquisitionParams(get("acquisition", "sampling_rate", base.acq.sampling_rate),
                                get("acquisition", "sound_speed", base.acq.sound_speed),
                                get("acquisition", "samples", base.acq.num_samples))
        noise = NoiseSpec(get("noise", "snr_db", base.noise.target_snr_db), get("noise", "seed", base.noise.seed))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    default_depths = tuple(a.center[1] for a in base.phantom.absorbers)
    depths = get("phantom", "depths", default_depths)
    n = len(depths)
    if n == 0:
        raise ConfigError("[phantom] depths must list at least one absorber", ["phantom.depths"])
    lateral = _broadcast("lateral", get("phantom", "lateral", (0.0,)), n)
    radius = _broadcast("radius", get("phantom", "radius", (0.1e-3,)), n)
    amplitude = _broadcast("amplitude", get("phantom", "amplitude", (1.0,)), n)
    try:
        phantom = Phantom(tuple(Absorber((x, z), r, a) for x, z, r, a in zip(lateral, depths, radius, amplitude)))
    except ValueError as exc:
        raise ConfigError(f"[phantom] {exc}", ["phantom.radius"]) from None

    half = geometry.num_elements // 2
    beamform = BeamformConfig(
        method=Method.DAS,
        subarray_length=get("beamform", "subarray_length", half),
        temporal_half_width=get("beamform", "temporal_half_width", base.beamform.temporal_half_width),
        subspace_threshold=get("beamform", "sigma", base.beamform.subspace_threshold),
        loading_factor=get("beamform", "delta", None),
        band=(get("beamform", "band_low", base.beamform.band[0]), get("beamform", "band_high", base.beamform.band[1])),
        tukey_alpha=get("beamform", "tukey_alpha", base.beamform.tukey_alpha),
        dynamic_range=get("beamform", "dynamic_range", base.beamform.dynamic_range),
        dmas_sqrt_mode=get("beamform", "dmas_sqrt_mode", base.beamform.dmas_sqrt_mode),
        interpolation=get("beamform", "interpolation", base.beamform.interpolation),
        filtering=get("beamform", "filtering", base.beamform.filtering),
        bandpass_scope=get("beamform", "bandpass_scope", base.beamform.bandpass_scope),
    )
    methods = get("beamform", "method", base.methods)

    grid_mode = get("output", "grid", base.grid_mode)
    try:
        grid = ImagingGrid(
            lateral_extent=get("output", "lateral_extent", base.grid.lateral_extent),
            axial_range=(get("output", "axial_start", base.grid.axial_range[0]),
                         get("output", "axial_end", base.grid.axial_range[1])),
            spacing=get("output", "spacing", GRID_MODES[grid_mode]),
        )
    except ValueError as exc:
        raise ConfigError(f"[output] {exc}", ["output.grid"]) from None

    channel_data = get("acquisition", "channel_data", None)
    cfg = RunConfig(
        phantom=phantom,
        geometry=geometry,
        acq=acq,
        noise=noise,
        methods=tuple(dict.fromkeys(methods)),
        beamform=beamform,
        grid=grid,
        grid_mode=grid_mode,
        output_dir=Path(get("output", "directory", str(base.output_dir))),
        formats=get("output", "formats", base.formats),
        profile_depths=get("output", "profile_depths", base.profile_depths),
        center_frequency=get("array", "center_frequency", base.center_frequency),
        fractional_bandwidth=get("array", "fractional_bandwidth", base.fractional_bandwidth),
        channel_data=Path(channel_data) if channel_data else None,
    )
    check(cfg)
    return cfg


def check(cfg: RunConfig) -> None:
    """Raise :class:`ConfigError` listing every violated invariant."""
    problems = []
    for method in cfg.methods:
        for violation in validate_config(cfg.method_config(method), cfg.geometry, cfg.acq):
            problems.append((f"beamform.{violation.field}", f"{method.value}: {violation.message}"))
    if not 0 < cfg.center_frequency < cfg.acq.sampling_rate / 2:
        problems.append(("array.center_frequency", "must lie in (0, fs/2)"))
    if not 0 < cfg.fractional_bandwidth < 2:
        problems.append(("array.fractional_bandwidth", "must lie in (0, 2)"))
    for depth in cfg.profile_depths:
        z0, z1 = cfg.grid.axial_range
        if not z0 <= depth <= z1:
            problems.append(("output.profile_depths", f"depth {depth} outside the axial range"))
    if problems:
        fields = tuple(dict.fromkeys(f for f, _ in problems))
        raise ConfigError("invalid configuration:\n" + "\n".join(f"  {f}: {m}" for f, m in problems), fields)


def _fmt(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (tuple, list)):
        return ", ".join(_fmt(v) for v in value)
    if isinstance(value, Method):
        return value.value
    return str(value)


def serialize_config(cfg: RunConfig, include_directory: bool = True) -> str:
    """Canonical INI text; ``parse_config(serialize_config(c)) == c``.

    ``include_directory=False`` leaves out the output directory, so the echo
    stored inside a run's artifacts does not depend on where they were written.
    """
    b = cfg.beamform
    absorbers = cfg.phantom.absorbers
    sections = {
        "array": {
            "elements": cfg.geometry.num_elements,
            "pitch": float(cfg.geometry.pitch),
            "center_frequency": float(cfg.center_frequency),
            "fractional_bandwidth": float(cfg.fractional_bandwidth),
        },
        "acquisition": {
            "sampling_rate": float(cfg.acq.sampling_rate),
            "sound_speed": float(cfg.acq.sound_speed),
            "samples": cfg.acq.num_samples,
        },
        "phantom": {
            "lateral": tuple(a.center[0] for a in absorbers),
            "depths": tuple(a.center[1] for a in absorbers),
            "radius": tuple(float(a.radius) for a in absorbers),
            "amplitude": tuple(float(a.amplitude) for a in absorbers),
        },
        "noise": {
            "snr_db": float(cfg.noise.target_snr_db),
            "seed": cfg.noise.seed,
        },
        "beamform": {
            "method": cfg.methods,
            "subarray_length": b.subarray_length,
            "temporal_half_width": b.temporal_half_width,
            "sigma": float(b.subspace_threshold),
            "delta": "auto" if b.loading_factor is None else float(b.loading_factor),
            "band_low": b.band[0],
            "band_high": b.band[1],
            "tukey_alpha": float(b.tukey_alpha),
            "dynamic_range": float(b.dynamic_range),
            "dmas_sqrt_mode": b.dmas_sqrt_mode,
            "interpolation": b.interpolation,
            "filtering": b.filtering,
            "bandpass_scope": b.bandpass_scope,
        },
        "output": {
            "formats": cfg.formats,
            "profile_depths": tuple(float(d) for d in cfg.profile_depths),
            "grid": cfg.grid_mode,
            "spacing": float(cfg.grid.spacing),
            "lateral_extent": float(cfg.grid.lateral_extent),
            "axial_start": cfg.grid.axial_range[0],
            "axial_end": cfg.grid.axial_range[1],
        },
    }
    if include_directory:
        sections["output"] = {"directory": cfg.output_dir.as_posix(), **sections["output"]}
    if cfg.channel_data is not None:
        sections["acquisition"]["channel_data"] = cfg.channel_data.as_posix()
    lines = []
    for name, items in sections.items():
        lines.append(f"[{name}]")
        lines.extend(f"{key} = {_fmt(value)}" for key, value in items.items())
        lines.append("")
    return "\n".join(lines)
