"""Command-line interface: track, evaluate, simulate, and analyze-cpd.

Option precedence for tracking runs, highest first: command-line flags,
``MOTRACK_*`` environment variables, a JSON config file, built-in defaults.
Exit codes: 0 success, 1 bad configuration or usage, 2 unreadable or
malformed input/output files, 3 unexpected internal failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from dataclasses import fields
from pathlib import Path

from . import __version__
from .clearmot import EvalConfig, compute_metrics
from .cpd import CpdConfig, LikelihoodSeries, change_point_scores
from .errors import ConfigError
from .mot_io import (
    MotIoError,
    ParseError,
    ParseStats,
    attach_appearance,
    load_appearance_sidecar,
    load_sequence_info,
    parse_detections,
    parse_ground_truth,
    parse_trajectories,
    write_trajectories,
)
from .pipeline import TrackingConfig, track_sequence
from .simulate import ScenarioSpec, generate_scenario, linear_scenario, write_scenario

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_IO = 2
EXIT_INTERNAL = 3
ENV_PREFIX = "MOTRACK_"

logger = logging.getLogger(__name__)


class _Parser(argparse.ArgumentParser):
    """argparse parser whose usage errors exit with the config error code."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


# Spelled-out synonyms for config flags whose field name is not the
# customary command-line vocabulary.
_FLAG_ALIASES = {"n_samples": ["--particles"]}


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("tracking configuration overrides")
    for f in fields(TrackingConfig):
        names = ["--" + f.name.replace("_", "-")] + _FLAG_ALIASES.get(f.name, [])
        group.add_argument(
            *names,
            dest=f.name,
            default=None,
            metavar="V",
            help=f"override {f.name} (default {f.default!r})",
        )


def _read_text(path: str | Path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(f"{path}: not a text file ({exc})", 0) from exc


def build_tracking_config(args: argparse.Namespace) -> TrackingConfig:
    """Merge config file, environment, and CLI flags over the defaults."""
    flat: dict = {}
    if args.config:
        try:
            data = json.loads(_read_text(args.config))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {args.config}: invalid JSON ({exc})") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"config file {args.config}: expected a JSON object")
        if isinstance(data.get("config"), dict):
            # A run manifest doubles as a config file: replaying it reuses
            # the resolved snapshot it recorded.
            data = data["config"]
        flat.update({str(k).replace("-", "_"): v for k, v in data.items()})
    for f in fields(TrackingConfig):
        env_key = ENV_PREFIX + f.name.upper()
        if env_key in os.environ:
            flat[f.name] = os.environ[env_key]
    for f in fields(TrackingConfig):
        value = getattr(args, f.name, None)
        if value is not None:
            flat[f.name] = value
    return TrackingConfig.from_flat(flat)


def _json_ready(value):
    if isinstance(value, tuple):
        return list(value)
    return value


def cmd_track(args: argparse.Namespace) -> int:
    start_total = time.perf_counter()
    config = build_tracking_config(args)
    info = load_sequence_info(args.seq_info)
    stats = ParseStats()
    start_parse = time.perf_counter()
    detections = parse_detections(args.det, stats=stats)
    if args.appearance:
        detections = attach_appearance(detections, load_appearance_sidecar(args.appearance))
    parse_seconds = time.perf_counter() - start_parse
    records, report = track_sequence(detections, info, config)
    start_write = time.perf_counter()
    write_trajectories(records, args.out)
    write_seconds = time.perf_counter() - start_write
    if args.manifest:
        manifest = {
            "command": "track",
            "version": __version__,
            "backend": report.backend,
            "sequence": {
                "name": info.name,
                "frame_count": info.frame_count,
                "image_width": info.image_width,
                "image_height": info.image_height,
                "frame_rate": info.frame_rate,
            },
            "inputs": {
                "detections": str(args.det),
                "seqinfo": str(args.seq_info),
                "appearance": str(args.appearance) if args.appearance else None,
                "config_file": str(args.config) if args.config else None,
            },
            "output": str(args.out),
            "config": config.to_flat(),
            "parse_stats": {
                "rows_total": stats.rows_total,
                "rows_rejected": stats.rows_rejected,
                "rescaled": stats.rescaled,
                "raw_confidence_range": _json_ready(stats.raw_confidence_range),
            },
            "report": report.to_dict(),
            "timings": {
                "parse_seconds": parse_seconds,
                "track_seconds": report.wall_time,
                "write_seconds": write_seconds,
                "total_seconds": time.perf_counter() - start_total,
            },
        }
        Path(args.manifest).write_text(
            json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
    print(
        f"tracked {report.frames} frames: {report.records} records, "
        f"{report.segments_emitted} segments, {report.fps:.1f} fps ({report.backend})"
    )
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace) -> int:
    if not 0.0 < args.iou <= 1.0:
        raise ConfigError(f"--iou must lie in (0, 1], got {args.iou}")
    ground_truth = parse_ground_truth(args.ground_truth)
    result = parse_trajectories(args.result)
    report = compute_metrics(
        ground_truth, result, EvalConfig(iou_threshold=args.iou, class_mode=args.class_mode)
    )
    print(f"MOTA {report.mota:.3f}")
    print(f"MOTP {report.motp:.3f}")
    print(
        f"GT {report.ground_truth_count}  FP {report.false_positives}  "
        f"FN {report.false_negatives}  IDSW {report.id_switches}  "
        f"Frag {report.fragmentations}"
    )
    print(
        f"MT {report.mostly_tracked}  PT {report.partially_tracked}  "
        f"ML {report.mostly_lost}  of {report.track_count} tracks  "
        f"FAF {report.false_alarms_per_frame:.3f}"
    )
    for class_id, sub in sorted(report.per_class.items()):
        print(f"  class {class_id}: MOTA {sub.mota:.3f} MOTP {sub.motp:.3f}")
    if args.output:
        Path(args.output).write_text(
            json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace) -> int:
    if args.scenario:
        spec = ScenarioSpec.from_json(_read_text(args.scenario))
    else:
        try:
            spec = linear_scenario(
                n_objects=args.objects,
                frame_count=args.frames,
                image_width=args.width,
                image_height=args.height,
                seed=args.seed,
                noise_sigma=args.noise_sigma,
                false_negative_rate=args.false_negative_rate,
                clutter_rate=args.clutter_rate,
                class_count=args.class_count,
                name=args.name,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    data = generate_scenario(spec)
    paths = write_scenario(spec, data, args.output)
    print(
        f"wrote scenario {spec.name!r}: {len(data.ground_truth)} truth rows, "
        f"{len(data.detections)} detections, {len(data.injections)} injections"
    )
    for key, value in sorted(paths.items()):
        print(f"  {key}: {value}")
    return EXIT_OK


def _read_series_csv(path: str | Path) -> dict[int, list[tuple[int, float]]]:
    """Read ``frame,value`` or ``segment,frame,value`` rows, ignoring '#'."""
    series: dict[int, list[tuple[int, float]]] = {}
    for line_no, raw in enumerate(_read_text(path).splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split(",")
        try:
            numbers = [float(p) for p in parts]
        except ValueError:
            if line_no == 1:  # tolerate a header row
                continue
            raise ParseError(f"non-numeric field in {parts}", line_no) from None
        if len(numbers) == 2:
            segment, frame, value = 1, int(numbers[0]), numbers[1]
        elif len(numbers) >= 3:
            segment, frame, value = int(numbers[0]), int(numbers[1]), numbers[2]
        else:
            raise ParseError("expected frame,value or segment,frame,value", line_no)
        series.setdefault(segment, []).append((frame, value))
    if not series:
        raise ParseError("no series rows found", 0)
    return series


def cmd_analyze_cpd(args: argparse.Namespace) -> int:
    try:
        cfg = CpdConfig(
            order=args.order,
            discount=args.discount,
            window=args.window,
            threshold=args.threshold,
            refractory=args.refractory,
            warmup=args.warmup,
            z_offset=args.z_offset,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    lines = ["segment,frame,likelihood,stage1,score,detected"]
    for segment_id, rows in sorted(_read_series_csv(args.input).items()):
        rows.sort()
        frames = tuple(frame for frame, _ in rows)
        values = tuple(value for _, value in rows)
        try:
            series = LikelihoodSeries(segment_id, frames, values)
        except ValueError as exc:
            raise ConfigError(f"segment {segment_id}: {exc}") from exc
        scored = change_point_scores(series, cfg)
        detected = set(scored.detected_points)
        for frame, value, stage1, score in zip(
            scored.frames, values, scored.raw_outlier_scores, scored.change_scores
        ):
            lines.append(
                f"{segment_id},{frame},{value:.9f},{stage1:.9f},{score:.9f},"
                f"{int(frame in detected)}"
            )
        points = ", ".join(str(p) for p in scored.detected_points) or "none"
        print(f"segment {segment_id}: {len(frames)} frames, change points: {points}")
    if args.output:
        Path(args.output).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="motrack", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument(
        "-v", "--verbose", action="store_true", help="log informational messages"
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    track = sub.add_parser("track", help="run the tracker on a detection file")
    track.add_argument("--det", required=True, help="detection CSV file")
    track.add_argument("--seq-info", required=True, help="sequence metadata .ini file")
    track.add_argument("--out", required=True, help="trajectory CSV to write")
    track.add_argument("--manifest", default=None, help="write a JSON run manifest here")
    track.add_argument("--appearance", default=None, help="appearance histogram sidecar")
    track.add_argument(
        "--config", default=None, help="JSON config file (flat keys, or a run manifest)"
    )
    _add_config_flags(track)
    track.set_defaults(func=cmd_track)

    ev = sub.add_parser("evaluate", help="score a result file against ground truth")
    ev.add_argument("--ground-truth", required=True, help="ground-truth CSV file")
    ev.add_argument("--result", required=True, help="tracker result CSV file")
    ev.add_argument("--iou", type=float, default=0.5, help="match threshold (default 0.5)")
    ev.add_argument(
        "--class-mode",
        choices=("ignore", "macro"),
        default="ignore",
        help="treat classes as one pool or average per class",
    )
    ev.add_argument("--output", default=None, help="write the metric report JSON here")
    ev.set_defaults(func=cmd_evaluate)

    sim = sub.add_parser("simulate", help="generate a synthetic sequence")
    sim.add_argument("--output", required=True, help="directory to write the sequence into")
    sim.add_argument("--scenario", default=None, help="scenario spec JSON (overrides presets)")
    sim.add_argument("--objects", type=int, default=10, help="preset: object count")
    sim.add_argument("--frames", type=int, default=300, help="preset: frame count")
    sim.add_argument("--width", type=int, default=1280, help="preset: image width")
    sim.add_argument("--height", type=int, default=720, help="preset: image height")
    sim.add_argument("--seed", type=int, default=0, help="preset: random seed")
    sim.add_argument("--noise-sigma", type=float, default=0.0, help="preset: jitter scale")
    sim.add_argument(
        "--false-negative-rate", type=float, default=0.0, help="preset: drop probability"
    )
    sim.add_argument(
        "--clutter-rate", type=float, default=0.0, help="preset: clutter boxes per frame"
    )
    sim.add_argument("--class-count", type=int, default=1, help="preset: number of classes")
    sim.add_argument("--name", default="linear", help="preset: sequence name")
    sim.set_defaults(func=cmd_simulate)

    cpd = sub.add_parser("analyze-cpd", help="score likelihood series for change points")
    cpd.add_argument("--input", required=True, help="CSV of frame,value or segment,frame,value")
    cpd.add_argument(
        "--output",
        default=None,
        help="write scores CSV (segment,frame,likelihood,stage1,score,detected) here",
    )
    cpd.add_argument("--order", type=int, default=CpdConfig.order)
    cpd.add_argument("--discount", type=float, default=CpdConfig.discount)
    cpd.add_argument("--window", type=int, default=CpdConfig.window)
    cpd.add_argument("--threshold", type=float, default=CpdConfig.threshold)
    cpd.add_argument("--refractory", type=int, default=CpdConfig.refractory)
    cpd.add_argument("--warmup", type=int, default=CpdConfig.warmup)
    cpd.add_argument("--z-offset", type=float, default=CpdConfig.z_offset)
    cpd.set_defaults(func=cmd_analyze_cpd)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (MotIoError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except Exception as exc:
        logger.exception("unexpected failure")
        print(f"internal error: {exc!r}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
