"""Forward-backward validation of closed track segments.

Each finished segment is re-tracked in reverse: a single-object chain starts
from the segment's terminal state with negated velocity and walks back to
the birth frame against the same detections.  A segment whose backward
estimate lands close to its forward birth box (relative to object size) is
confirmed; one that lands far away drifted at some point, and the caller
truncates it at the earliest detected change point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .mot_io import BoundingBox, Detection
from .motion import MotionModel, predict_state
from .observation import DetectorWeightSet, ObjectState, ObservationParams, default_weights
from .sampler import ChainConfig, SceneParticle, run_chain

DEFAULT_DIAGONAL_RATIO = 0.5


@dataclass(frozen=True)
class TrackSegment:
    """One contiguous span of a single identity's trajectory.

    ``scores`` carries the per-frame fused likelihoods (the series that
    change-point scoring consumes); ``matched`` flags the frames backed by
    an actual detection (empty means every frame was); ``terminal_velocity``
    is the smoothed velocity at the last frame, which seeds the reverse
    pass.
    """

    segment_id: int
    identity: int
    class_id: int
    frames: tuple[int, ...]
    boxes: tuple[BoundingBox, ...]
    scores: tuple[float, ...]
    matched: tuple[bool, ...] = ()
    terminal_velocity: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if not self.frames:
            raise ValueError("a segment needs at least one frame")
        if not (len(self.frames) == len(self.boxes) == len(self.scores)):
            raise ValueError("frames, boxes and scores must align")
        if self.matched and len(self.matched) != len(self.frames):
            raise ValueError("matched flags must align with frames")
        for a, b in zip(self.frames, self.frames[1:]):
            if b != a + 1:
                raise ValueError("segment frames must be contiguous and ascending")

    @property
    def start(self) -> int:
        return self.frames[0]

    @property
    def end(self) -> int:
        return self.frames[-1]

    def __len__(self) -> int:
        return len(self.frames)

    def mean_diagonal(self) -> float:
        return sum(b.diagonal for b in self.boxes) / len(self.boxes)

    def match_count(self) -> int:
        """Frames backed by a detection; all of them when flags are absent."""
        return sum(self.matched) if self.matched else len(self.frames)


@dataclass(frozen=True)
class FbVerdict:
    """Outcome of one segment's forward-backward check."""

    segment_id: int
    distance: float
    threshold: float
    confirmed: bool


def fb_distance(forward: BoundingBox, backward: BoundingBox) -> float:
    """Euclidean distance between two box centers."""
    fx, fy = forward.center
    bx, by = backward.center
    return math.hypot(fx - bx, fy - by)


def reverse_track(
    segment: TrackSegment,
    detections_by_frame: dict[int, list[Detection]],
    cfg: ChainConfig,
    motion: MotionModel | None = None,
    obs: ObservationParams | None = None,
    weights: DetectorWeightSet | None = None,
    kernel=None,
) -> tuple[BoundingBox, ...]:
    """Backward re-track of one segment, aligned with ``segment.frames``.

    The terminal frame is taken as-is (no chain runs there), so a one-frame
    segment reverses to exactly itself.  Earlier frames each run a chain of
    the single object against that frame's detections, with the random
    stream keyed by the segment id so reverse draws never collide with the
    forward pass or with other segments.
    """
    motion = motion or MotionModel()
    obs = obs or ObservationParams()
    weights = weights or default_weights()
    vx, vy = segment.terminal_velocity
    state = ObjectState(
        identity=segment.identity,
        class_id=segment.class_id,
        box=segment.boxes[-1],
        velocity=(-vx, -vy),
    )
    backward = [segment.boxes[-1]]
    prev_samples = [SceneParticle(frame=segment.end, states={segment.identity: state})]
    alpha = motion.velocity_smoothing
    for pos in range(len(segment.frames) - 2, -1, -1):
        frame = segment.frames[pos]
        seeded = replace(state, box=predict_state(state, motion))
        init = SceneParticle(frame=frame, states={segment.identity: seeded})
        samples, estimate = run_chain(
            init,
            prev_samples,
            detections_by_frame.get(frame, []),
            cfg,
            motion=motion,
            obs=obs,
            weights=weights,
            stream=segment.segment_id,
            kernel=kernel,
        )
        new_box = estimate.map_particle.states[segment.identity].box
        pcx, pcy = state.box.center
        ncx, ncy = new_box.center
        velocity = (
            (1.0 - alpha) * state.velocity[0] + alpha * (ncx - pcx),
            (1.0 - alpha) * state.velocity[1] + alpha * (ncy - pcy),
        )
        state = replace(state, box=new_box, velocity=velocity)
        backward.append(new_box)
        prev_samples = samples
    backward.reverse()
    return tuple(backward)


def validate_segment(
    segment: TrackSegment,
    backward_boxes: tuple[BoundingBox, ...],
    diagonal_ratio: float = DEFAULT_DIAGONAL_RATIO,
) -> FbVerdict:
    """Compare forward and backward estimates at the birth frame.

    The segment is confirmed when the center distance stays within
    ``diagonal_ratio`` times the segment's mean box diagonal.
    """
    if len(backward_boxes) != len(segment.frames):
        raise ValueError("backward estimates must align with the segment frames")
    distance = fb_distance(segment.boxes[0], backward_boxes[0])
    threshold = diagonal_ratio * segment.mean_diagonal()
    return FbVerdict(
        segment_id=segment.segment_id,
        distance=distance,
        threshold=threshold,
        confirmed=distance <= threshold,
    )


def split_segment(
    segment: TrackSegment, frame: int, tail_segment_id: int
) -> tuple[TrackSegment | None, TrackSegment | None]:
    """Split at ``frame``: head keeps frames before it, tail starts there.

    Either side may come out None when the cut lands on a boundary.  The
    tail keeps the identity and terminal velocity; the head ends with zero
    velocity since its smoothed estimate no longer applies at the cut.
    """
    if frame <= segment.start:
        return None, replace(segment, segment_id=tail_segment_id)
    if frame > segment.end:
        return segment, None
    cut = frame - segment.start
    head = TrackSegment(
        segment_id=segment.segment_id,
        identity=segment.identity,
        class_id=segment.class_id,
        frames=segment.frames[:cut],
        boxes=segment.boxes[:cut],
        scores=segment.scores[:cut],
        matched=segment.matched[:cut],
        terminal_velocity=(0.0, 0.0),
    )
    tail = TrackSegment(
        segment_id=tail_segment_id,
        identity=segment.identity,
        class_id=segment.class_id,
        frames=segment.frames[cut:],
        boxes=segment.boxes[cut:],
        scores=segment.scores[cut:],
        matched=segment.matched[cut:],
        terminal_velocity=segment.terminal_velocity,
    )
    return head, tail
