"""Command-line entry point: ``pabeam simulate|beamform|metrics|pipeline``.

Exit codes: 0 success, 2 invalid configuration, 3 I/O failure, 4 a method
failed numerically.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import formats
from .config import GRID_MODES, ConfigError, RunConfig, check, parse_config, serialize_config
from .core import ImagingGrid, Method
from .pipeline import (
    CONVENTIONS,
    EXIT_IO,
    EXIT_NUMERICAL,
    EXIT_OK,
    EXIT_VALIDATION,
    ArtifactWriter,
    PipelineIOError,
    acquire,
    export_method,
    measure,
    prepare_output,
    reconstruct,
    run_pipeline,
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pabeam", description="Photoacoustic beamforming experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="INI configuration file (defaults apply when omitted)")
    common.add_argument("--output", type=Path, help="output directory (overrides [output] directory)")
    common.add_argument("--seed", type=int, help="noise seed (overrides [noise] seed)")
    common.add_argument("--grid", choices=sorted(GRID_MODES), help="output grid spacing preset")

    methods = argparse.ArgumentParser(add_help=False)
    methods.add_argument("--methods", help="comma-separated methods, e.g. DAS,EIBMV_DMAS")
    methods.add_argument("--workers", type=int, default=1, help="processes per method reconstruction")

    sub.add_parser("simulate", parents=[common], help="write noisy channel data")
    beam = sub.add_parser("beamform", parents=[common, methods], help="reconstruct images from channel data")
    beam.add_argument("--channels", type=Path, help="channel data file (overrides [acquisition] channel_data)")
    sub.add_parser("metrics", parents=[common, methods], help="measure envelope images in the output directory")
    sub.add_parser("pipeline", parents=[common, methods], help="simulate, beamform and measure")
    return parser


def load_config(args) -> RunConfig:
    text = ""
    if args.config is not None:
        try:
            text = args.config.read_text()
        except OSError as exc:
            raise PipelineIOError(f"cannot read {args.config}: {exc}") from exc
    cfg = parse_config(text)
    changes = {}
    if args.output is not None:
        changes["output_dir"] = args.output
    if args.seed is not None:
        changes["noise"] = type(cfg.noise)(cfg.noise.target_snr_db, args.seed)
    if args.grid is not None:
        g = cfg.grid
        changes["grid"] = ImagingGrid(g.lateral_extent, g.axial_range, GRID_MODES[args.grid])
        changes["grid_mode"] = args.grid
    if getattr(args, "methods", None) is not None:
        try:
            names = [n for n in args.methods.split(",") if n.strip()]
            changes["methods"] = tuple(dict.fromkeys(Method.parse(n) for n in names))
        except ValueError as exc:
            raise ConfigError(f"--methods: {exc}", ["beamform.method"]) from None
    if getattr(args, "channels", None) is not None:
        changes["channel_data"] = args.channels
    cfg = cfg.replace(**changes)
    check(cfg)
    return cfg


def cmd_simulate(cfg: RunConfig, args) -> int:
    root = prepare_output(cfg.output_dir)
    writer = ArtifactWriter(root)
    writer.write("config.ini", serialize_config(cfg, include_directory=False).encode("utf-8"))
    path = writer.write("channels.pabeam", formats.channel_bytes(acquire(cfg)))
    writer.write_manifest({}, cfg.noise.seed)
    print(path)
    return EXIT_OK


def cmd_beamform(cfg: RunConfig, args) -> int:
    root = prepare_output(cfg.output_dir)
    writer = ArtifactWriter(root)
    writer.write("config.ini", serialize_config(cfg, include_directory=False).encode("utf-8"))
    channels = acquire(cfg)
    statuses = {}
    for method in cfg.methods:
        try:
            images = reconstruct(channels, cfg, method, args.workers)
        except (np.linalg.LinAlgError, FloatingPointError, ValueError) as exc:
            statuses[method.value] = {"status": "failed", "error": str(exc)}
            print(f"{method.value}: failed: {exc}", file=sys.stderr)
            continue
        export_method(writer, method, images, cfg)
        statuses[method.value] = {"status": "ok"}
    writer.write_manifest(statuses, cfg.noise.seed)
    failed = any(s["status"] != "ok" for s in statuses.values())
    return EXIT_NUMERICAL if failed else EXIT_OK


def cmd_metrics(cfg: RunConfig, args) -> int:
    root = Path(cfg.output_dir)
    metrics = {}
    for method in cfg.methods:
        path = root / f"{method.value.lower()}_envelope.npy"
        try:
            envelope = np.load(path, allow_pickle=False)
        except OSError as exc:
            raise PipelineIOError(f"cannot read {path}: {exc}") from exc
        if envelope.shape != cfg.grid.shape:
            raise ConfigError(f"{path.name} has shape {envelope.shape}, grid expects {cfg.grid.shape}", ["output.grid"])
        metrics[method.value] = measure(envelope, cfg.grid, cfg.phantom, cfg.profile_depths)
    text = formats.report_text(formats.report_document(
        metrics, serialize_config(cfg, include_directory=False), cfg.noise.seed, CONVENTIONS))
    try:
        (root / "report.json").write_text(text)
    except OSError as exc:
        raise PipelineIOError(f"cannot write report: {exc}") from exc
    sys.stdout.write(text)
    return EXIT_OK


def cmd_pipeline(cfg: RunConfig, args) -> int:
    result = run_pipeline(cfg, workers=args.workers)
    for name, status in result.manifest["methods"].items():
        if status["status"] != "ok":
            print(f"{name}: failed: {status['error']}", file=sys.stderr)
    print(json.dumps(result.report["methods"], sort_keys=True, indent=2, default=str))
    return result.exit_code


COMMANDS = {"simulate": cmd_simulate, "beamform": cmd_beamform, "metrics": cmd_metrics, "pipeline": cmd_pipeline}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"pabeam: configuration error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except formats.FormatError as exc:
        print(f"pabeam: bad channel file: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"pabeam: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
