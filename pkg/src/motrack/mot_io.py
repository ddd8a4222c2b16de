"""Reading and writing MOT-layout CSV files and sequence metadata.

Detection and ground-truth files follow the plain-text benchmark layout:
one comma-separated row per box, frames numbered from 1. Trajectory output
uses the same row shape with fixed two-decimal reals so that files are
byte-stable across runs.
"""

from __future__ import annotations

import configparser
import logging
import math
from dataclasses import dataclass, replace
from pathlib import Path

from .errors import ConfigError

logger = logging.getLogger(__name__)


class MotIoError(Exception):
    """Base class for file-content errors raised by this module."""


class ParseError(MotIoError):
    """A row could not be interpreted.  Carries the 1-based line number."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class DuplicateRecordError(ParseError):
    """Two rows claim the same (frame, identity) pair."""

    def __init__(self, frame: int, identity: int, first_line: int, line: int):
        super().__init__(
            f"duplicate record for frame={frame} id={identity} "
            f"(first seen on line {first_line})",
            line,
        )
        self.first_line = first_line


class SequenceInfoError(ConfigError):
    """A mandatory sequence-metadata key is missing or malformed."""

    def __init__(self, key: str, detail: str = "missing"):
        super().__init__(f"sequence info key {key!r}: {detail}")
        self.key = key


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box in pixel coordinates, (left, top) corner plus size."""

    left: float
    top: float
    width: float
    height: float

    def __post_init__(self):
        for name in ("left", "top", "width", "height"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"bounding box {name} must be finite")
        if self.width <= 0 or self.height <= 0:
            raise ValueError(
                f"bounding box must have positive size, got {self.width}x{self.height}"
            )

    @property
    def right(self) -> float:
        return self.left + self.width

    @property
    def bottom(self) -> float:
        return self.top + self.height

    @property
    def center(self) -> tuple[float, float]:
        return (self.left + 0.5 * self.width, self.top + 0.5 * self.height)

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def diagonal(self) -> float:
        return math.hypot(self.width, self.height)


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection-over-union of two boxes, 0.0 when disjoint."""
    ix = min(a.right, b.right) - max(a.left, b.left)
    if ix <= 0.0:
        return 0.0
    iy = min(a.bottom, b.bottom) - max(a.top, b.top)
    if iy <= 0.0:
        return 0.0
    inter = ix * iy
    return inter / (a.area + b.area - inter)


@dataclass(frozen=True)
class Detection:
    """One detector response: a class-labelled box with confidence.

    ``appearance`` optionally holds a normalized color histogram loaded from
    a sidecar file; most detection files carry none.
    """

    frame: int
    class_id: int
    box: BoundingBox
    confidence: float
    appearance: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.frame < 1:
            raise ValueError(f"frame numbers start at 1, got {self.frame}")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence must lie in [0, 1], got {self.confidence}")
        if self.appearance is not None:
            total = sum(self.appearance)
            if any(v < 0 for v in self.appearance) or abs(total - 1.0) > 1e-9:
                raise ValueError("appearance histogram must be normalized")


@dataclass(frozen=True)
class TrajectoryRecord:
    """One frame of one identity in a trajectory file (result or ground truth)."""

    frame: int
    identity: int
    class_id: int
    box: BoundingBox
    score: float
    ignored: bool = False

    def __post_init__(self):
        if self.frame < 1:
            raise ValueError(f"frame numbers start at 1, got {self.frame}")
        if self.identity < 1:
            raise ValueError(f"identities are positive integers, got {self.identity}")
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score must lie in [0, 1], got {self.score}")


@dataclass
class SequenceInfo:
    """Sequence metadata from a seqinfo.ini file."""

    name: str
    frame_count: int
    image_width: int
    image_height: int
    frame_rate: float = 30.0

    def __post_init__(self):
        if self.frame_count < 1:
            raise SequenceInfoError("seqLength", f"must be >= 1, got {self.frame_count}")
        if self.image_width < 1 or self.image_height < 1:
            raise SequenceInfoError("imWidth/imHeight", "must be >= 1")
        if self.frame_rate <= 0:
            raise SequenceInfoError("frameRate", f"must be > 0, got {self.frame_rate}")


@dataclass
class ParseStats:
    """Counters describing what a parse accepted, rejected, or adjusted."""

    rows_total: int = 0
    rows_rejected: int = 0
    rescaled: bool = False
    raw_confidence_range: tuple[float, float] | None = None


def _split_row(raw: str, line_no: int, minimum: int) -> list[float]:
    parts = raw.strip().split(",")
    if len(parts) < minimum:
        raise ParseError(
            f"expected at least {minimum} comma-separated fields, got {len(parts)}",
            line_no,
        )
    try:
        return [float(p) for p in parts]
    except ValueError as exc:
        raise ParseError(f"non-numeric field ({exc})", line_no) from None


def parse_detections(
    path: str | Path,
    class_map: dict[int, int] | None = None,
    default_class: int = 1,
    stats: ParseStats | None = None,
) -> list[Detection]:
    """Load a detection file.

    Rows are ``frame,id,left,top,width,height,conf[,x,y,z]``.  The id column
    is ignored (detections carry no identity).  When the eighth column holds a
    non-negative value it is read as a class label (mapped through
    ``class_map`` when given); otherwise ``default_class`` applies, which
    matches single-class benchmark files where the trailing columns are -1.

    Confidence values falling outside [0, 1] anywhere in the file trigger a
    per-file min-max rescale; the adjustment is logged and reflected in
    ``stats`` when a :class:`ParseStats` instance is supplied.  Rows with a
    non-positive width or height are rejected and counted, not fatal.
    Returns detections sorted by frame, then confidence descending.
    """
    if stats is None:
        stats = ParseStats()
    rows: list[tuple[int, int, BoundingBox, float, int]] = []
    text = Path(path).read_text(encoding="utf-8")
    for line_no, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip():
            continue
        stats.rows_total += 1
        fields = _split_row(raw, line_no, 7)
        frame = int(fields[0])
        if frame < 1:
            raise ParseError(f"frame numbers start at 1, got {frame}", line_no)
        left, top, width, height = fields[2:6]
        if width <= 0 or height <= 0:
            stats.rows_rejected += 1
            continue
        conf = fields[6]
        if not math.isfinite(conf):
            raise ParseError(f"confidence is not finite: {conf}", line_no)
        class_id = default_class
        if len(fields) >= 8 and fields[7] >= 0:
            raw_class = int(fields[7])
            class_id = class_map.get(raw_class, raw_class) if class_map else raw_class
        rows.append((frame, line_no, BoundingBox(left, top, width, height), conf, class_id))

    if stats.rows_rejected:
        logger.warning(
            "%s: rejected %d row(s) with non-positive box size", path, stats.rows_rejected
        )

    confidences = [r[3] for r in rows]
    if confidences:
        lo, hi = min(confidences), max(confidences)
        stats.raw_confidence_range = (lo, hi)
        if lo < 0.0 or hi > 1.0:
            stats.rescaled = True
            span = hi - lo
            if span > 0:
                confidences = [(c - lo) / span for c in confidences]
            else:
                confidences = [1.0 for _ in confidences]
            logger.warning(
                "%s: confidences outside [0, 1] (range %.4g..%.4g), min-max rescaled",
                path,
                lo,
                hi,
            )

    detections = [
        Detection(frame=frame, class_id=class_id, box=box, confidence=conf)
        for (frame, _line, box, _raw, class_id), conf in zip(rows, confidences)
    ]
    detections.sort(key=lambda d: (d.frame, -d.confidence))
    return detections


def parse_ground_truth(path: str | Path) -> list[TrajectoryRecord]:
    """Load a ground-truth file.

    Rows are ``frame,id,left,top,width,height,flag,class,visibility``; the
    last three columns default to 1, 1, 1.0 when absent.  Rows with flag 0
    are kept but marked ``ignored`` so evaluation can exclude them.  Output
    is grouped by identity (sorted by identity, then frame).  Two rows for
    the same (frame, id) raise :class:`DuplicateRecordError` naming both
    line numbers.
    """
    records: list[TrajectoryRecord] = []
    seen: dict[tuple[int, int], int] = {}
    text = Path(path).read_text(encoding="utf-8")
    for line_no, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip():
            continue
        fields = _split_row(raw, line_no, 6)
        frame, identity = int(fields[0]), int(fields[1])
        key = (frame, identity)
        if key in seen:
            raise DuplicateRecordError(frame, identity, seen[key], line_no)
        seen[key] = line_no
        left, top, width, height = fields[2:6]
        if width <= 0 or height <= 0:
            raise ParseError(
                f"ground truth box must have positive size, got {width}x{height}", line_no
            )
        flag = int(fields[6]) if len(fields) >= 7 else 1
        class_id = int(fields[7]) if len(fields) >= 8 and fields[7] >= 0 else 1
        visibility = float(fields[8]) if len(fields) >= 9 else 1.0
        records.append(
            TrajectoryRecord(
                frame=frame,
                identity=identity,
                class_id=class_id,
                box=BoundingBox(left, top, width, height),
                score=min(max(visibility, 0.0), 1.0),
                ignored=(flag == 0),
            )
        )
    records.sort(key=lambda r: (r.identity, r.frame))
    return records


def _fmt(value: float) -> str:
    out = f"{value:.2f}"
    return "0.00" if out == "-0.00" else out


def write_trajectories(records: list[TrajectoryRecord], path: str | Path) -> None:
    """Write trajectory records as ``frame,id,l,t,w,h,conf,class,-1,-1`` rows.

    Rows are sorted by frame then identity and reals are printed with fixed
    two-decimal precision, so identical inputs produce identical bytes.  The
    default class (1) is written as the conventional -1 placeholder, keeping
    single-class output byte-compatible with the common benchmark layout;
    other classes are written out so they survive a round trip.
    """
    keys = set()
    for rec in records:
        key = (rec.frame, rec.identity)
        if key in keys:
            raise ValueError(f"duplicate trajectory record for frame={rec.frame} id={rec.identity}")
        keys.add(key)
    ordered = sorted(records, key=lambda r: (r.frame, r.identity))
    lines = [
        f"{r.frame},{r.identity},{_fmt(r.box.left)},{_fmt(r.box.top)},"
        f"{_fmt(r.box.width)},{_fmt(r.box.height)},{_fmt(r.score)},"
        f"{r.class_id if r.class_id != 1 else -1},-1,-1"
        for r in ordered
    ]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def write_ground_truth(records: list[TrajectoryRecord], path: str | Path) -> None:
    """Write ground truth as ``frame,id,l,t,w,h,flag,class,visibility`` rows.

    The record's ``ignored`` flag becomes flag 0 and its score is written as
    the visibility column; rows are sorted by identity then frame.
    """
    ordered = sorted(records, key=lambda r: (r.identity, r.frame))
    lines = [
        f"{r.frame},{r.identity},{_fmt(r.box.left)},{_fmt(r.box.top)},"
        f"{_fmt(r.box.width)},{_fmt(r.box.height)},{0 if r.ignored else 1},"
        f"{r.class_id},{_fmt(r.score)}"
        for r in ordered
    ]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def parse_trajectories(path: str | Path) -> list[TrajectoryRecord]:
    """Load a tracker result file (``frame,id,l,t,w,h,score[,class,...]``).

    Unlike ground truth there is no ignore flag: column 7 is the score
    (clamped to [0, 1]) and a non-negative column 8 is the class label.
    Duplicate (frame, id) rows raise :class:`DuplicateRecordError`.
    """
    records: list[TrajectoryRecord] = []
    seen: dict[tuple[int, int], int] = {}
    text = Path(path).read_text(encoding="utf-8")
    for line_no, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip():
            continue
        fields = _split_row(raw, line_no, 7)
        frame, identity = int(fields[0]), int(fields[1])
        key = (frame, identity)
        if key in seen:
            raise DuplicateRecordError(frame, identity, seen[key], line_no)
        seen[key] = line_no
        left, top, width, height = fields[2:6]
        if width <= 0 or height <= 0:
            raise ParseError(
                f"trajectory box must have positive size, got {width}x{height}", line_no
            )
        class_id = int(fields[7]) if len(fields) >= 8 and fields[7] >= 0 else 1
        records.append(
            TrajectoryRecord(
                frame=frame,
                identity=identity,
                class_id=class_id,
                box=BoundingBox(left, top, width, height),
                score=min(max(fields[6], 0.0), 1.0),
            )
        )
    records.sort(key=lambda r: (r.identity, r.frame))
    return records


def load_sequence_info(path: str | Path) -> SequenceInfo:
    """Read a seqinfo.ini file.

    Mandatory keys: seqLength, imWidth, imHeight.  frameRate defaults to 30
    and name falls back to the directory holding the file.
    """
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    parser = configparser.ConfigParser()
    try:
        parser.read_string(text)
    except configparser.MissingSectionHeaderError:
        parser.read_string("[Sequence]\n" + text)
    section = None
    for name in parser.sections():
        if name.lower() == "sequence":
            section = parser[name]
            break
    if section is None:
        if not parser.sections():
            raise SequenceInfoError("Sequence", "no sections found")
        section = parser[parser.sections()[0]]

    def _require_int(key: str) -> int:
        if key not in section:
            raise SequenceInfoError(key)
        try:
            return int(float(section[key]))
        except ValueError:
            raise SequenceInfoError(key, f"not a number: {section[key]!r}") from None

    name = section.get("name", path.parent.name or "sequence")
    frame_rate = float(section.get("frameRate", "30"))
    return SequenceInfo(
        name=name,
        frame_count=_require_int("seqLength"),
        image_width=_require_int("imWidth"),
        image_height=_require_int("imHeight"),
        frame_rate=frame_rate,
    )


def load_appearance_sidecar(path: str | Path) -> dict[tuple[int, int], tuple[float, ...]]:
    """Load per-detection appearance histograms.

    Rows are ``frame,det_index,b1,...,bK`` where ``det_index`` is the
    0-based position of the detection within its frame after the standard
    parse ordering (confidence descending).  Histograms must be normalized.
    """
    out: dict[tuple[int, int], tuple[float, ...]] = {}
    text = Path(path).read_text(encoding="utf-8")
    for line_no, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip():
            continue
        fields = _split_row(raw, line_no, 3)
        frame, det_index = int(fields[0]), int(fields[1])
        hist = tuple(fields[2:])
        if any(v < 0 for v in hist) or abs(sum(hist) - 1.0) > 1e-9:
            raise ParseError("appearance histogram must be normalized", line_no)
        out[(frame, det_index)] = hist
    return out


def attach_appearance(
    detections: list[Detection],
    histograms: dict[tuple[int, int], tuple[float, ...]],
) -> list[Detection]:
    """Return detections with sidecar histograms attached by (frame, index)."""
    position: dict[int, int] = {}
    out = []
    for det in detections:
        idx = position.get(det.frame, 0)
        position[det.frame] = idx + 1
        hist = histograms.get((det.frame, idx))
        out.append(replace(det, appearance=hist) if hist is not None else det)
    return out


def group_by_frame(detections: list[Detection]) -> dict[int, list[Detection]]:
    """Bucket detections per frame, preserving their relative order."""
    groups: dict[int, list[Detection]] = {}
    for det in detections:
        groups.setdefault(det.frame, []).append(det)
    return groups
