"""Synthetic sequence generation with exactly known ground truth.

A scenario spec fixes the scene (objects on constant-velocity paths) and
the corruption applied to the detector output: Gaussian jitter on box
centers and sizes, random false-negative drops, occlusion windows, Poisson
clutter, and detection-stream swaps between object pairs.  Everything is
driven by one seeded generator, so a spec plus a seed reproduces the same
files byte for byte.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .mot_io import (
    BoundingBox,
    Detection,
    SequenceInfo,
    TrajectoryRecord,
    write_ground_truth,
)

CLUTTER_CONF = (0.3, 0.7)
TRUE_CONF = (0.7, 1.0)


@dataclass(frozen=True)
class ObjectSpec:
    """One simulated object: a constant-velocity path and a fixed size."""

    identity: int
    class_id: int
    start_frame: int
    end_frame: int
    x: float
    y: float
    vx: float
    vy: float
    width: float
    height: float

    def __post_init__(self):
        if self.identity < 1:
            raise ValueError(f"identities are positive integers, got {self.identity}")
        if self.start_frame < 1 or self.end_frame < self.start_frame:
            raise ValueError("object lifespan must satisfy 1 <= start <= end")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("object size must be positive")


@dataclass(frozen=True)
class OcclusionWindow:
    """Frames (inclusive) during which one object yields no detection."""

    identity: int
    start_frame: int
    end_frame: int

    def __post_init__(self):
        if self.end_frame < self.start_frame:
            raise ValueError("occlusion window must satisfy start <= end")


@dataclass(frozen=True)
class DriftInjection:
    """Swap two objects' detection streams from ``frame`` onward.

    Each object's detections continue with its own jitter and confidence
    draws but placed on the other object's path.  With different classes
    this reproduces a detector-level identity drift: the support under each
    track abruptly changes class.
    """

    frame: int
    identity_a: int
    identity_b: int

    def __post_init__(self):
        if self.identity_a == self.identity_b:
            raise ValueError("a drift swap needs two distinct identities")


@dataclass(frozen=True)
class ScenarioSpec:
    """Complete description of a synthetic sequence."""

    name: str
    frame_count: int
    image_width: int
    image_height: int
    frame_rate: float = 30.0
    seed: int = 0
    noise_sigma: float = 0.0
    false_negative_rate: float = 0.0
    clutter_rate: float = 0.0
    objects: tuple[ObjectSpec, ...] = ()
    occlusions: tuple[OcclusionWindow, ...] = ()
    drifts: tuple[DriftInjection, ...] = ()

    def __post_init__(self):
        if self.frame_count < 1:
            raise ValueError(f"frame_count must be >= 1, got {self.frame_count}")
        if self.image_width < 1 or self.image_height < 1:
            raise ValueError("image size must be positive")
        if self.noise_sigma < 0 or not 0.0 <= self.false_negative_rate < 1.0:
            raise ValueError("noise_sigma must be >= 0 and false_negative_rate in [0, 1)")
        if self.clutter_rate < 0:
            raise ValueError(f"clutter_rate must be >= 0, got {self.clutter_rate}")
        seen = set()
        for obj in self.objects:
            if obj.identity in seen:
                raise ValueError(f"duplicate object identity {obj.identity}")
            seen.add(obj.identity)
        object.__setattr__(self, "objects", tuple(self.objects))
        object.__setattr__(self, "occlusions", tuple(self.occlusions))
        object.__setattr__(self, "drifts", tuple(self.drifts))

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "ScenarioSpec":
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"scenario is not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("scenario JSON must be an object")
        try:
            objects = tuple(ObjectSpec(**o) for o in raw.pop("objects", []))
            occlusions = tuple(OcclusionWindow(**o) for o in raw.pop("occlusions", []))
            drifts = tuple(DriftInjection(**d) for d in raw.pop("drifts", []))
            return cls(objects=objects, occlusions=occlusions, drifts=drifts, **raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad scenario spec: {exc}") from exc

    def info(self) -> SequenceInfo:
        return SequenceInfo(
            name=self.name,
            frame_count=self.frame_count,
            image_width=self.image_width,
            image_height=self.image_height,
            frame_rate=self.frame_rate,
        )


@dataclass
class ScenarioData:
    """Generated sequence: truth, corrupted detections, and what was done."""

    info: SequenceInfo
    ground_truth: list[TrajectoryRecord]
    detections: list[Detection]
    injections: list[dict] = field(default_factory=list)


def _clamped_center(
    spec: ObjectSpec, frame: int, image: tuple[int, int]
) -> tuple[float, float]:
    """Path position at ``frame``, clamped so the box stays on the canvas."""
    cx = spec.x + spec.vx * (frame - spec.start_frame)
    cy = spec.y + spec.vy * (frame - spec.start_frame)
    half_w, half_h = 0.5 * spec.width, 0.5 * spec.height
    cx = min(max(cx, half_w), image[0] - half_w)
    cy = min(max(cy, half_h), image[1] - half_h)
    return cx, cy


def generate_scenario(spec: ScenarioSpec) -> ScenarioData:
    """Realize a spec into ground truth plus corrupted detections.

    Objects are visited per frame in identity order and all random draws
    come from one PCG64 generator seeded by the spec, so output is a pure
    function of the spec.  The injection log records every occlusion drop,
    false-negative drop, clutter box, and active stream swap.
    """
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    image = (spec.image_width, spec.image_height)
    by_identity = {obj.identity: obj for obj in sorted(spec.objects, key=lambda o: o.identity)}
    for occ in spec.occlusions:
        if occ.identity not in by_identity:
            raise ConfigError(f"occlusion references unknown identity {occ.identity}")
    for drift in spec.drifts:
        for identity in (drift.identity_a, drift.identity_b):
            if identity not in by_identity:
                raise ConfigError(f"drift references unknown identity {identity}")

    classes = sorted({obj.class_id for obj in spec.objects}) or [1]
    if by_identity:
        mean_w = sum(o.width for o in by_identity.values()) / len(by_identity)
        mean_h = sum(o.height for o in by_identity.values()) / len(by_identity)
    else:
        mean_w, mean_h = 40.0, 80.0

    ground_truth: list[TrajectoryRecord] = []
    detections: list[Detection] = []
    injections: list[dict] = []
    corrupted = (
        spec.noise_sigma > 0 or spec.false_negative_rate > 0 or spec.clutter_rate > 0
    )

    for frame in range(1, spec.frame_count + 1):
        # Resolve active stream swaps: identity -> identity whose path it reports.
        follows = {identity: identity for identity in by_identity}
        for drift in spec.drifts:
            if frame >= drift.frame:
                follows[drift.identity_a], follows[drift.identity_b] = (
                    follows[drift.identity_b],
                    follows[drift.identity_a],
                )
                if frame == drift.frame:
                    injections.append(
                        {
                            "kind": "swap",
                            "frame": frame,
                            "identities": [drift.identity_a, drift.identity_b],
                        }
                    )

        for identity, obj in by_identity.items():
            alive = obj.start_frame <= frame <= obj.end_frame
            if alive:
                cx, cy = _clamped_center(obj, frame, image)
                ground_truth.append(
                    TrajectoryRecord(
                        frame=frame,
                        identity=identity,
                        class_id=obj.class_id,
                        box=BoundingBox(
                            cx - 0.5 * obj.width, cy - 0.5 * obj.height, obj.width, obj.height
                        ),
                        score=1.0,
                    )
                )
            # The detection stream may be re-pointed at another object's path.
            source = by_identity[follows[identity]]
            if not alive or not (source.start_frame <= frame <= source.end_frame):
                continue
            occluded = any(
                occ.identity == identity and occ.start_frame <= frame <= occ.end_frame
                for occ in spec.occlusions
            )
            if occluded:
                injections.append({"kind": "occlusion", "frame": frame, "identity": identity})
                continue
            if spec.false_negative_rate > 0 and rng.random() < spec.false_negative_rate:
                injections.append({"kind": "drop", "frame": frame, "identity": identity})
                continue
            scx, scy = _clamped_center(source, frame, image)
            if spec.noise_sigma > 0:
                jitter = rng.standard_normal(4)
                scx += jitter[0] * spec.noise_sigma
                scy += jitter[1] * spec.noise_sigma
                width = source.width * math.exp(jitter[2] * spec.noise_sigma / source.width)
                height = source.height * math.exp(jitter[3] * spec.noise_sigma / source.height)
            else:
                width, height = source.width, source.height
            conf = float(rng.uniform(*TRUE_CONF)) if corrupted else 1.0
            detections.append(
                Detection(
                    frame=frame,
                    class_id=obj.class_id,
                    box=BoundingBox(scx - 0.5 * width, scy - 0.5 * height, width, height),
                    confidence=conf,
                )
            )

        if spec.clutter_rate > 0:
            for _ in range(int(rng.poisson(spec.clutter_rate))):
                width = mean_w * rng.uniform(0.5, 1.5)
                height = mean_h * rng.uniform(0.5, 1.5)
                cx = rng.uniform(0.5 * width, spec.image_width - 0.5 * width)
                cy = rng.uniform(0.5 * height, spec.image_height - 0.5 * height)
                class_id = classes[int(rng.integers(len(classes)))]
                conf = float(rng.uniform(*CLUTTER_CONF))
                box = BoundingBox(cx - 0.5 * width, cy - 0.5 * height, width, height)
                detections.append(
                    Detection(frame=frame, class_id=class_id, box=box, confidence=conf)
                )
                injections.append(
                    {"kind": "clutter", "frame": frame, "confidence": round(conf, 4)}
                )

    detections.sort(key=lambda d: (d.frame, -d.confidence))
    ground_truth.sort(key=lambda r: (r.identity, r.frame))
    return ScenarioData(
        info=spec.info(),
        ground_truth=ground_truth,
        detections=detections,
        injections=injections,
    )


def _fmt(value: float) -> str:
    out = f"{value:.2f}"
    return "0.00" if out == "-0.00" else out


def write_scenario(spec: ScenarioSpec, data: ScenarioData, out_dir: str | Path) -> dict:
    """Write a benchmark-layout directory; returns the created paths.

    Layout: ``seqinfo.ini``, ``det/det.txt``, ``gt/gt.txt``, plus the spec
    (``scenario.json``) and the injection log (``injections.json``).
    """
    out = Path(out_dir)
    (out / "det").mkdir(parents=True, exist_ok=True)
    (out / "gt").mkdir(parents=True, exist_ok=True)

    info = data.info
    seqinfo = (
        "[Sequence]\n"
        f"name={info.name}\n"
        f"imDir=img1\n"
        f"frameRate={info.frame_rate:g}\n"
        f"seqLength={info.frame_count}\n"
        f"imWidth={info.image_width}\n"
        f"imHeight={info.image_height}\n"
    )
    (out / "seqinfo.ini").write_text(seqinfo, encoding="utf-8")

    det_lines = [
        f"{d.frame},-1,{_fmt(d.box.left)},{_fmt(d.box.top)},{_fmt(d.box.width)},"
        f"{_fmt(d.box.height)},{_fmt(d.confidence)},"
        f"{d.class_id if d.class_id != 1 else -1},-1,-1"
        for d in data.detections
    ]
    (out / "det" / "det.txt").write_text(
        "\n".join(det_lines) + ("\n" if det_lines else ""), encoding="utf-8"
    )
    write_ground_truth(data.ground_truth, out / "gt" / "gt.txt")
    (out / "scenario.json").write_text(spec.to_json() + "\n", encoding="utf-8")
    (out / "injections.json").write_text(
        json.dumps(data.injections, indent=2) + "\n", encoding="utf-8"
    )
    return {
        "seqinfo": out / "seqinfo.ini",
        "detections": out / "det" / "det.txt",
        "ground_truth": out / "gt" / "gt.txt",
        "scenario": out / "scenario.json",
        "injections": out / "injections.json",
    }


def linear_scenario(
    n_objects: int = 10,
    frame_count: int = 300,
    image_width: int = 1280,
    image_height: int = 720,
    seed: int = 0,
    noise_sigma: float = 0.0,
    false_negative_rate: float = 0.0,
    clutter_rate: float = 0.0,
    class_count: int = 1,
    name: str = "linear",
) -> ScenarioSpec:
    """Preset: objects on spread-out straight paths crossing the frame.

    The layout is deterministic arithmetic (no random draws), so two presets
    with the same arguments are identical specs; randomness enters only
    through the corruption parameters when the scenario is generated.
    """
    if n_objects < 1:
        raise ValueError(f"n_objects must be >= 1, got {n_objects}")
    objects = []
    for k in range(n_objects):
        lane = (k + 1) / (n_objects + 1)
        rightward = k % 2 == 0
        speed = 2.0 + 0.5 * (k % 3)
        # Horizontal lanes at distinct heights never cross each other, so a
        # noiseless run of this preset is unambiguous for a tracker.
        if rightward:
            x = image_width * (0.10 + 0.45 * k / n_objects)
        else:
            x = image_width * (0.90 - 0.45 * k / n_objects)
        objects.append(
            ObjectSpec(
                identity=k + 1,
                class_id=(k % class_count) + 1,
                start_frame=1,
                end_frame=frame_count,
                x=x,
                y=lane * image_height,
                vx=speed if rightward else -speed,
                vy=0.0,
                width=40.0 + 6.0 * (k % 4),
                height=80.0 + 8.0 * (k % 3),
            )
        )
    return ScenarioSpec(
        name=name,
        frame_count=frame_count,
        image_width=image_width,
        image_height=image_height,
        seed=seed,
        noise_sigma=noise_sigma,
        false_negative_rate=false_negative_rate,
        clutter_rate=clutter_rate,
        objects=tuple(objects),
    )
