"""Constant-velocity motion model and per-frame entity transitions.

Births and deaths are resolved before the per-frame sampling pass so the
sampler always works at fixed dimension.  Every candidate entity falls into
exactly one of four cases per frame: born, died, alive, or never
instantiated (null).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .mot_io import BoundingBox, Detection, iou
from .observation import ObjectState

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class MotionModel:
    """Constant-velocity transition kernel parameters.

    The process noise acts on the box center (pixels) and on log width /
    log height, so sizes stay positive under perturbation.
    """

    process_sigma_pos: float = 2.0
    process_sigma_size: float = 0.05
    velocity_decay: float = 1.0
    velocity_smoothing: float = 0.5

    def __post_init__(self):
        if self.process_sigma_pos <= 0 or self.process_sigma_size <= 0:
            raise ValueError("process noise scales must be positive")
        if not 0.0 < self.velocity_decay <= 1.0:
            raise ValueError(f"velocity_decay must lie in (0, 1], got {self.velocity_decay}")
        if not 0.0 <= self.velocity_smoothing <= 1.0:
            raise ValueError("velocity_smoothing must lie in [0, 1]")


@dataclass(frozen=True)
class EntryModel:
    """Birth/death gating: where objects may appear and how long they coast."""

    border_margin: float = 50.0
    beta_border: float = 0.9
    beta_interior: float = 0.3
    birth_threshold: float = 0.4
    birth_prob_min: float = 0.2
    miss_tolerance: int = 8
    match_iou: float = 0.3

    def __post_init__(self):
        if not 0.0 <= self.beta_border <= 1.0 or not 0.0 <= self.beta_interior <= 1.0:
            raise ValueError("entry priors must lie in [0, 1]")
        if not 0.0 <= self.birth_prob_min <= 1.0:
            raise ValueError("birth_prob_min must lie in [0, 1]")
        if self.miss_tolerance < 1:
            raise ValueError("miss_tolerance must be >= 1")


@dataclass(frozen=True)
class EntityStatus:
    """Complementary transition probabilities for one (identity, frame) event.

    ``case`` names which of the four transitions applies; identity 0 marks a
    candidate entity that was never instantiated (null case only).
    """

    identity: int
    birth: float
    death: float
    alive: float
    null: float
    case: str

    def __post_init__(self):
        for name in ("birth", "death", "alive", "null"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} probability out of [0, 1]: {v}")
        if self.case not in ("birth", "death", "alive", "null"):
            raise ValueError(f"unknown case {self.case!r}")
        if self.case != "null" and self.identity < 1:
            raise ValueError("instantiated entities need a positive identity")


@dataclass
class TrackContext:
    """What the entity gate needs to know about one live track."""

    state: ObjectState
    misses: int = 0
    last_likelihood: float = 1.0


@dataclass(frozen=True)
class BirthCandidate:
    identity: int
    detection: Detection
    p_birth: float
    at_border: bool


@dataclass(frozen=True)
class DeathNotice:
    identity: int
    p_death: float
    frame: int


@dataclass
class EntityTransitionResult:
    statuses: list[EntityStatus] = field(default_factory=list)
    births: list[BirthCandidate] = field(default_factory=list)
    deaths: list[DeathNotice] = field(default_factory=list)
    matches: dict[int, Detection] = field(default_factory=dict)


def predict_box(box: BoundingBox, velocity: tuple[float, float], decay: float) -> BoundingBox:
    """Shift a box center by velocity * decay; size is carried unchanged."""
    return BoundingBox(
        left=box.left + velocity[0] * decay,
        top=box.top + velocity[1] * decay,
        width=box.width,
        height=box.height,
    )


def predict_state(state: ObjectState, model: MotionModel) -> BoundingBox:
    return predict_box(state.box, state.velocity, model.velocity_decay)


def motion_prior(proposed: BoundingBox, predicted: BoundingBox, model: MotionModel) -> float:
    """Transition density of a proposed box around the predicted one.

    Independent Gaussians on the center coordinates (process_sigma_pos) and
    on log width / log height (process_sigma_size).  The maximum is the
    normalization constant, reached when proposed == predicted.
    """
    sp = model.process_sigma_pos
    ss = model.process_sigma_size
    pcx, pcy = proposed.center
    qcx, qcy = predicted.center
    dx = (pcx - qcx) / sp
    dy = (pcy - qcy) / sp
    dw = (math.log(proposed.width) - math.log(predicted.width)) / ss
    dh = (math.log(proposed.height) - math.log(predicted.height)) / ss
    norm = 1.0 / (TWO_PI * TWO_PI * sp * sp * ss * ss)
    return norm * math.exp(-0.5 * (dx * dx + dy * dy + dw * dw + dh * dh))


def _touches_border(box: BoundingBox, image_size: tuple[int, int], margin: float) -> bool:
    width, height = image_size
    return (
        box.left <= margin
        or box.top <= margin
        or box.right >= width - margin
        or box.bottom >= height - margin
    )


def estimate_entity_transitions(
    prev_tracks: list[TrackContext],
    frame_detections: list[Detection],
    entry: EntryModel,
    frame: int,
    model: MotionModel,
    image_size: tuple[int, int],
    next_identity: int = 1,
) -> EntityTransitionResult:
    """Resolve births, deaths and survivals for one frame.

    Detections are matched greedily (confidence descending) against the
    predicted boxes of live tracks of the same class at IoU >= match_iou.
    An unmatched detection becomes a birth candidate when its confidence
    reaches the birth threshold and its birth probability p = conf * beta
    reaches birth_prob_min; beta depends on whether the box touches the
    border margin, so interior detections need proportionally higher
    confidence to instantiate.  All other detections yield null statuses
    (no entity).  Tracks unmatched for miss_tolerance consecutive frames
    receive a death notice with p = 1 - (fused likelihood at the last
    frame).
    """
    result = EntityTransitionResult()
    predicted = {
        ctx.state.identity: predict_state(ctx.state, model) for ctx in prev_tracks
    }
    by_identity = {ctx.state.identity: ctx for ctx in prev_tracks}

    order = sorted(
        range(len(frame_detections)),
        key=lambda i: (-frame_detections[i].confidence, i),
    )
    unmatched_ids = set(by_identity)
    matched_det_indices: set[int] = set()
    for det_idx in order:
        det = frame_detections[det_idx]
        best_id, best_iou = None, entry.match_iou
        for identity in unmatched_ids:
            ctx = by_identity[identity]
            if ctx.state.class_id != det.class_id:
                continue
            overlap = iou(predicted[identity], det.box)
            if overlap >= best_iou:
                best_iou = overlap
                best_id = identity
        if best_id is not None:
            unmatched_ids.discard(best_id)
            matched_det_indices.add(det_idx)
            result.matches[best_id] = det

    for identity in sorted(by_identity):
        ctx = by_identity[identity]
        p_death = min(max(1.0 - ctx.last_likelihood, 0.0), 1.0)
        if identity in result.matches:
            result.statuses.append(
                EntityStatus(identity, 0.0, p_death, 1.0 - p_death, 0.0, "alive")
            )
        elif ctx.misses + 1 >= entry.miss_tolerance:
            result.deaths.append(DeathNotice(identity, p_death, frame))
            result.statuses.append(
                EntityStatus(identity, 0.0, p_death, 1.0 - p_death, 0.0, "death")
            )
        else:
            result.statuses.append(
                EntityStatus(identity, 0.0, p_death, 1.0 - p_death, 0.0, "alive")
            )

    for det_idx in order:
        det = frame_detections[det_idx]
        at_border = _touches_border(det.box, image_size, entry.border_margin)
        beta = entry.beta_border if at_border else entry.beta_interior
        p_birth = min(max(det.confidence * beta, 0.0), 1.0)
        if (
            det_idx not in matched_det_indices
            and det.confidence >= entry.birth_threshold
            and p_birth >= entry.birth_prob_min
        ):
            identity = next_identity
            next_identity += 1
            result.births.append(BirthCandidate(identity, det, p_birth, at_border))
            result.statuses.append(
                EntityStatus(identity, p_birth, 0.0, 0.0, 1.0 - p_birth, "birth")
            )
        else:
            result.statuses.append(
                EntityStatus(0, p_birth, 0.0, 0.0, 1.0 - p_birth, "null")
            )
    return result
