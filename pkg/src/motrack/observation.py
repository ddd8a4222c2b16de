"""Per-detector likelihood providers and their weighted log-space fusion.

Each provider maps an object state to a likelihood in (0, 1].  The fused
value is exp(sum_e lambda_e * f(log L_e)) with the soft floor
f(u) = log(eps + (1 - eps) * exp(u)); with eps = 0 this reduces to the
weighted geometric mean of the provider values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

from .mot_io import BoundingBox, Detection, iou


@dataclass(frozen=True)
class ObjectState:
    """A tracked object's pose at one frame."""

    identity: int
    class_id: int
    box: BoundingBox
    velocity: tuple[float, float] = (0.0, 0.0)
    appearance_ref: tuple[float, ...] | None = None


@dataclass(frozen=True)
class ObservationParams:
    """Knobs shared by the built-in likelihood providers."""

    gate_iou: float = 0.3
    detection_floor: float = 0.01
    fusion_floor: float = 0.01
    sigma_color: float = 0.5
    sigma_motion: float = 0.7


@dataclass
class DetectorWeightSet:
    """Per-provider fusion weights; must be non-negative and sum to one."""

    weights: dict[str, float]

    def __post_init__(self):
        if not self.weights:
            raise ValueError("weight set must not be empty")
        if any(w < 0 for w in self.weights.values()):
            raise ValueError("weights must be non-negative")
        total = sum(self.weights.values())
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"weights must sum to 1, got {total}")

    @classmethod
    def equal(cls, names: tuple[str, ...] | list[str]) -> "DetectorWeightSet":
        share = 1.0 / len(names)
        return cls({name: share for name in names})


DEFAULT_PROVIDER_NAMES = ("detection", "appearance", "motion")


def default_weights() -> DetectorWeightSet:
    return DetectorWeightSet.equal(DEFAULT_PROVIDER_NAMES)


@dataclass(frozen=True)
class FusedLikelihood:
    """Fused value plus the per-provider inputs that produced it."""

    value: float
    per_detector: dict[str, float]


def bhattacharyya_distance(p: tuple[float, ...], q: tuple[float, ...]) -> float:
    """Distance sqrt(1 - sum_i sqrt(p_i * q_i)) between two histograms."""
    if len(p) != len(q):
        raise ValueError(f"histogram lengths differ: {len(p)} vs {len(q)}")
    if any(v < 0 for v in p) or any(v < 0 for v in q):
        raise ValueError("histogram entries must be non-negative")
    coefficient = sum(math.sqrt(a * b) for a, b in zip(p, q))
    return math.sqrt(max(0.0, 1.0 - min(coefficient, 1.0)))


def appearance_likelihood(
    state: ObjectState,
    candidate_hist: tuple[float, ...] | None,
    sigma: float = 0.5,
) -> float:
    """exp(-d^2 / sigma^2) for the Bhattacharyya distance d to the reference.

    Abstains (returns 1.0) when either histogram is missing, so objects
    without appearance data are unaffected by this provider.
    """
    if state.appearance_ref is None or candidate_hist is None:
        return 1.0
    d = bhattacharyya_distance(state.appearance_ref, candidate_hist)
    return math.exp(-(d * d) / (sigma * sigma))


def detection_response(
    state: ObjectState,
    detections: list[Detection],
    gate_iou: float = 0.3,
    floor: float = 0.01,
) -> tuple[float, Detection | None]:
    """Detection-ensemble likelihood plus the argmax detection.

    Scans detections of the state's class whose IoU with the state box
    reaches the gate and takes the best confidence * IoU product:
    L = floor + (1 - floor) * best.  The winning detection is returned for
    use as the data-driven proposal anchor; None when nothing gates in.
    """
    best = 0.0
    best_det: Detection | None = None
    for det in detections:
        if det.class_id != state.class_id:
            continue
        overlap = iou(state.box, det.box)
        if overlap >= gate_iou:
            score = det.confidence * overlap
            if score > best:
                best = score
                best_det = det
    return floor + (1.0 - floor) * best, best_det


def detection_likelihood(
    state: ObjectState,
    detections: list[Detection],
    gate_iou: float = 0.3,
    floor: float = 0.01,
) -> float:
    return detection_response(state, detections, gate_iou, floor)[0]


def motion_likelihood(state: ObjectState, predicted: BoundingBox, sigma: float = 0.7) -> float:
    """exp(-(1 - IoU)^2 / sigma^2) between the state box and its prediction."""
    gap = 1.0 - iou(state.box, predicted)
    return math.exp(-(gap * gap) / (sigma * sigma))


def soft_floor_log(u: float, floor: float) -> float:
    """f(u) = log(floor + (1 - floor) * exp(u)); identity when floor == 0."""
    return math.log(floor + (1.0 - floor) * math.exp(u))


def fuse_likelihoods(
    per_detector: dict[str, float],
    weights: DetectorWeightSet,
    floor: float = 0.01,
) -> FusedLikelihood:
    """Fuse provider likelihoods in log space with the soft floor.

    Every provider named in ``per_detector`` must carry a weight and vice
    versa.  The floor bounds the fused value from below: no single collapsed
    provider can drive the product to zero.
    """
    if set(per_detector) != set(weights.weights):
        raise ValueError(
            f"provider names {sorted(per_detector)} do not match "
            f"weight names {sorted(weights.weights)}"
        )
    if not 0.0 <= floor < 1.0:
        raise ValueError(f"floor must lie in [0, 1), got {floor}")
    log_sum = 0.0
    for name, value in per_detector.items():
        if not 0.0 < value <= 1.0 or not math.isfinite(value):
            raise ValueError(f"provider {name!r} likelihood must lie in (0, 1], got {value}")
        log_sum += weights.weights[name] * soft_floor_log(math.log(value), floor)
    return FusedLikelihood(value=math.exp(log_sum), per_detector=dict(per_detector))


@dataclass
class FrameContext:
    """Inputs the built-in providers need for one evaluation."""

    detections: list[Detection]
    predicted: BoundingBox | None = None
    params: ObservationParams = field(default_factory=ObservationParams)


ProviderFn = Callable[[ObjectState, FrameContext], float]


def _detection_provider(state: ObjectState, ctx: FrameContext) -> float:
    return detection_likelihood(
        state, ctx.detections, ctx.params.gate_iou, ctx.params.detection_floor
    )


def _appearance_provider(state: ObjectState, ctx: FrameContext) -> float:
    _, best = detection_response(
        state, ctx.detections, ctx.params.gate_iou, ctx.params.detection_floor
    )
    hist = best.appearance if best is not None else None
    return appearance_likelihood(state, hist, ctx.params.sigma_color)


def _motion_provider(state: ObjectState, ctx: FrameContext) -> float:
    if ctx.predicted is None:
        return 1.0
    return motion_likelihood(state, ctx.predicted, ctx.params.sigma_motion)


PROVIDERS: dict[str, ProviderFn] = {
    "detection": _detection_provider,
    "appearance": _appearance_provider,
    "motion": _motion_provider,
}


def register_provider(name: str, fn: ProviderFn) -> None:
    """Add or replace a provider in the registry."""
    PROVIDERS[name] = fn


def evaluate_providers(
    state: ObjectState,
    ctx: FrameContext,
    names: tuple[str, ...] | list[str] = DEFAULT_PROVIDER_NAMES,
) -> dict[str, float]:
    missing = [n for n in names if n not in PROVIDERS]
    if missing:
        raise KeyError(f"unknown providers: {missing}")
    return {name: PROVIDERS[name](state, ctx) for name in names}


def fuse_frame(
    state: ObjectState,
    ctx: FrameContext,
    weights: DetectorWeightSet | None = None,
) -> FusedLikelihood:
    """Evaluate the weighted providers for one state and fuse the result."""
    if weights is None:
        weights = default_weights()
    values = evaluate_providers(state, ctx, tuple(weights.weights))
    return fuse_likelihoods(values, weights, ctx.params.fusion_floor)
