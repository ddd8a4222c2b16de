"""Metropolis-Hastings refinement of all live object states in one frame.

The chain perturbs one object at a time with a mixture proposal: a
constant-velocity motion component averaged over the previous frame's
retained samples, and a data-driven component centered on the object's
associated detection.  Births and deaths are resolved before the chain runs,
so the state dimension is fixed for the whole frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import backend
from .mot_io import BoundingBox, Detection
from .motion import MotionModel, predict_box
from .observation import (
    DetectorWeightSet,
    ObjectState,
    ObservationParams,
    bhattacharyya_distance,
    default_weights,
)

STREAM_FORWARD = 0
TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class ChainConfig:
    """Sampler knobs: chain length, proposal mixture, and data kernel widths."""

    n_samples: int = 100
    burn_in: int = 30
    lambda_motion: float = 0.5
    sigma_data: float = 4.0
    sigma_data_size: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError(f"n_samples must be >= 1, got {self.n_samples}")
        if self.burn_in < 0:
            raise ValueError(f"burn_in must be >= 0, got {self.burn_in}")
        if not 0.0 <= self.lambda_motion <= 1.0:
            raise ValueError(f"lambda_motion must lie in [0, 1], got {self.lambda_motion}")
        if self.sigma_data <= 0 or self.sigma_data_size <= 0:
            raise ValueError("data kernel widths must be positive")
        if self.seed < 0:
            raise ValueError(f"seed must be non-negative, got {self.seed}")

    @property
    def lambda_data(self) -> float:
        return 1.0 - self.lambda_motion


@dataclass(frozen=True)
class SceneParticle:
    """One hypothesis for the whole scene at one frame."""

    frame: int
    states: dict[int, ObjectState]


@dataclass(frozen=True)
class PosteriorEstimate:
    """Summary of the retained samples for one frame."""

    map_particle: SceneParticle
    per_object_mean: dict[int, BoundingBox]
    per_object_likelihood: dict[int, float]


def box_to_c(box: BoundingBox) -> tuple[float, float, float, float]:
    """(cx, cy, w, h) form used by the kernels."""
    cx, cy = box.center
    return (cx, cy, box.width, box.height)


def box_from_c(cx: float, cy: float, w: float, h: float) -> BoundingBox:
    return BoundingBox(left=cx - 0.5 * w, top=cy - 0.5 * h, width=w, height=h)


def frame_random_values(
    seed: int, frame: int, iters: int, stream: int = STREAM_FORWARD
) -> tuple[np.ndarray, np.ndarray]:
    """Counter-based random draws for one frame's chain.

    A Philox stream keyed by the run seed and positioned by (frame, stream)
    makes every frame's draws independent of processing order, so forward
    tracking and per-segment reverse tracking reproduce exactly.
    """
    counter = np.array([0, 0, frame, stream], dtype=np.uint64)
    bits = np.random.Philox(key=int(seed), counter=counter)
    gen = np.random.Generator(bits)
    u = gen.random((iters, 4))
    z = gen.standard_normal((iters, 4))
    return u, z


@dataclass
class ChainInputs:
    """Array-level chain inputs (object order is fixed and shared)."""

    frame: int
    ids: list[int]
    boxes: np.ndarray  # (n, 4) cx cy w h
    classes: np.ndarray  # (n,)
    velocities: np.ndarray  # (n, 2)
    prev_boxes: np.ndarray  # (S, n, 4) retained boxes from the previous frame
    det_boxes: np.ndarray  # (m, 4)
    det_conf: np.ndarray  # (m,)
    det_classes: np.ndarray  # (m,)
    assoc: np.ndarray  # (n,) index into detections or -1
    app_factor: np.ndarray | None = None  # (n, m) appearance likelihoods


@dataclass
class ChainOutputs:
    samples: np.ndarray  # (N, n, 4)
    obj_likelihood: np.ndarray  # (N, n)
    scene_loglik: np.ndarray  # (N,)
    map_index: int
    accepted: int


_BUILTIN_ORDER = ("detection", "appearance", "motion")


def _weight_triplet(weights: DetectorWeightSet) -> tuple[float, float, float]:
    if set(weights.weights) != set(_BUILTIN_ORDER):
        raise ValueError(
            f"the sampling kernel fuses the built-in providers {_BUILTIN_ORDER}; "
            f"got weights for {sorted(weights.weights)}"
        )
    return tuple(weights.weights[name] for name in _BUILTIN_ORDER)


def run_chain_arrays(
    inp: ChainInputs,
    cfg: ChainConfig,
    motion: MotionModel,
    obs: ObservationParams,
    weights: DetectorWeightSet,
    stream: int = STREAM_FORWARD,
    kernel=None,
) -> ChainOutputs:
    """Drive one frame's chain on packed arrays (the pipeline's hot path)."""
    n = inp.boxes.shape[0]
    if n == 0:
        raise ValueError("chain requires at least one object; skip empty frames")
    w_det, w_app, w_mot = _weight_triplet(weights)
    iters = cfg.burn_in + cfg.n_samples
    u, z = frame_random_values(cfg.seed, inp.frame, iters, stream)

    prev_pred = np.ascontiguousarray(inp.prev_boxes, dtype=np.float64).copy()
    prev_pred[:, :, 0] += inp.velocities[:, 0][None, :] * motion.velocity_decay
    prev_pred[:, :, 1] += inp.velocities[:, 1][None, :] * motion.velocity_decay
    prev_log_w = np.log(prev_pred[:, :, 2])
    prev_log_h = np.log(prev_pred[:, :, 3])

    det_boxes = np.ascontiguousarray(inp.det_boxes, dtype=np.float64)
    m = det_boxes.shape[0]
    det_conf = np.ascontiguousarray(inp.det_conf, dtype=np.float64)
    det_log_w = np.log(det_boxes[:, 2]) if m else np.empty(0)
    det_log_h = np.log(det_boxes[:, 3]) if m else np.empty(0)
    det_ok = np.ascontiguousarray(
        inp.det_classes[None, :] == inp.classes[:, None], dtype=np.uint8
    )
    if inp.app_factor is not None:
        app_factor = np.ascontiguousarray(inp.app_factor, dtype=np.float64)
    else:
        app_factor = np.ones((n, m), dtype=np.float64)

    boxes = np.ascontiguousarray(inp.boxes, dtype=np.float64).copy()
    pred_box = boxes.copy()  # the chain seed is the motion-model prediction
    assoc = np.ascontiguousarray(inp.assoc, dtype=np.int64)

    out_samples = np.empty((cfg.n_samples, n, 4), dtype=np.float64)
    out_lik = np.empty((cfg.n_samples, n), dtype=np.float64)
    kern = kernel if kernel is not None else backend.get_kernel()
    accepted = kern(
        boxes,
        np.ascontiguousarray(prev_pred),
        np.ascontiguousarray(prev_log_w),
        np.ascontiguousarray(prev_log_h),
        det_boxes,
        det_conf,
        np.ascontiguousarray(det_log_w),
        np.ascontiguousarray(det_log_h),
        det_ok,
        app_factor,
        pred_box,
        assoc,
        u,
        z,
        cfg.burn_in,
        cfg.lambda_motion,
        motion.process_sigma_pos,
        motion.process_sigma_size,
        cfg.sigma_data,
        cfg.sigma_data_size,
        obs.gate_iou,
        obs.detection_floor,
        obs.fusion_floor,
        1.0 / (obs.sigma_motion * obs.sigma_motion),
        w_det,
        w_app,
        w_mot,
        out_samples,
        out_lik,
    )
    scene_loglik = np.log(out_lik).sum(axis=1)
    map_index = int(np.argmax(scene_loglik))
    return ChainOutputs(
        samples=out_samples,
        obj_likelihood=out_lik,
        scene_loglik=scene_loglik,
        map_index=map_index,
        accepted=int(accepted),
    )


def argmax_detection(
    state: ObjectState,
    detections: list[Detection],
    gate_iou: float,
) -> int:
    """Index of the best class-matched, IoU-gated detection, or -1."""
    from .mot_io import iou as box_iou

    best, best_j = 0.0, -1
    for j, det in enumerate(detections):
        if det.class_id != state.class_id:
            continue
        overlap = box_iou(state.box, det.box)
        if overlap >= gate_iou:
            score = det.confidence * overlap
            if score > best:
                best, best_j = score, j
    return best_j


def appearance_factors(
    states: list[ObjectState],
    detections: list[Detection],
    sigma_color: float,
) -> np.ndarray | None:
    """Pairwise appearance likelihoods, or None when no histograms exist."""
    if not any(s.appearance_ref is not None for s in states):
        return None
    if not any(d.appearance is not None for d in detections):
        return None
    out = np.ones((len(states), len(detections)), dtype=np.float64)
    inv = 1.0 / (sigma_color * sigma_color)
    for i, state in enumerate(states):
        if state.appearance_ref is None:
            continue
        for j, det in enumerate(detections):
            if det.appearance is None:
                continue
            d = bhattacharyya_distance(state.appearance_ref, det.appearance)
            out[i, j] = math.exp(-(d * d) * inv)
    return out


def chain_inputs_from_states(
    frame: int,
    states: dict[int, ObjectState],
    prev_samples: list[SceneParticle],
    detections: list[Detection],
    obs: ObservationParams,
) -> ChainInputs:
    """Pack object-level structures into kernel arrays.

    Objects missing from a previous sample (newborns) contribute their own
    seed box, making their motion mixture a single Gaussian around it.
    """
    ids = sorted(states)
    ordered = [states[i] for i in ids]
    boxes = np.array([box_to_c(s.box) for s in ordered], dtype=np.float64)
    classes = np.array([s.class_id for s in ordered], dtype=np.int64)
    velocities = np.array([s.velocity for s in ordered], dtype=np.float64)
    if prev_samples:
        rows = []
        for particle in prev_samples:
            rows.append(
                [
                    box_to_c(particle.states[i].box) if i in particle.states else box_to_c(states[i].box)
                    for i in ids
                ]
            )
        prev_boxes = np.array(rows, dtype=np.float64)
    else:
        prev_boxes = boxes[None, :, :].copy()
    det_boxes = np.array([box_to_c(d.box) for d in detections], dtype=np.float64).reshape(
        len(detections), 4
    )
    det_conf = np.array([d.confidence for d in detections], dtype=np.float64)
    det_classes = np.array([d.class_id for d in detections], dtype=np.int64)
    assoc = np.array(
        [argmax_detection(s, detections, obs.gate_iou) for s in ordered], dtype=np.int64
    )
    app = appearance_factors(ordered, detections, obs.sigma_color)
    return ChainInputs(
        frame=frame,
        ids=ids,
        boxes=boxes,
        classes=classes,
        velocities=velocities,
        prev_boxes=prev_boxes,
        det_boxes=det_boxes,
        det_conf=det_conf,
        det_classes=det_classes,
        assoc=assoc,
        app_factor=app,
    )


def run_chain(
    init: SceneParticle,
    prev_samples: list[SceneParticle],
    frame_detections: list[Detection],
    cfg: ChainConfig,
    motion: MotionModel | None = None,
    obs: ObservationParams | None = None,
    weights: DetectorWeightSet | None = None,
    stream: int = STREAM_FORWARD,
    kernel=None,
) -> tuple[list[SceneParticle], PosteriorEstimate]:
    """Run one frame's chain and return retained samples plus a summary.

    ``init`` holds the post-transition states (predictions for survivors,
    detection boxes for newborns).  Deterministic for a given seed: the
    random stream is derived from (cfg.seed, init.frame, stream) alone.
    """
    motion = motion or MotionModel()
    obs = obs or ObservationParams()
    weights = weights or default_weights()
    if not init.states:
        raise ValueError("chain requires at least one object; skip empty frames")
    inp = chain_inputs_from_states(init.frame, init.states, prev_samples, frame_detections, obs)
    out = run_chain_arrays(inp, cfg, motion, obs, weights, stream=stream, kernel=kernel)

    samples: list[SceneParticle] = []
    for k in range(cfg.n_samples):
        sample_states = {
            obj_id: replace(init.states[obj_id], box=box_from_c(*out.samples[k, col]))
            for col, obj_id in enumerate(inp.ids)
        }
        samples.append(SceneParticle(frame=init.frame, states=sample_states))

    mean_boxes = out.samples.mean(axis=0)
    per_object_mean = {
        obj_id: box_from_c(*mean_boxes[col]) for col, obj_id in enumerate(inp.ids)
    }
    per_object_likelihood = {
        obj_id: float(out.obj_likelihood[out.map_index, col])
        for col, obj_id in enumerate(inp.ids)
    }
    estimate = PosteriorEstimate(
        map_particle=samples[out.map_index],
        per_object_mean=per_object_mean,
        per_object_likelihood=per_object_likelihood,
    )
    return samples, estimate


def motion_mixture_density(
    box: BoundingBox, predicted_boxes: list[BoundingBox], model: MotionModel
) -> float:
    """(1/S) * sum_s N(box | predicted_s) under the process-noise kernel."""
    from .motion import motion_prior

    total = 0.0
    for pred in predicted_boxes:
        total += motion_prior(box, pred, model)
    return total / len(predicted_boxes)


def data_proposal_density(box: BoundingBox, det_box: BoundingBox, cfg: ChainConfig) -> float:
    """Gaussian around the detection: center in pixels, size in log space."""
    sd = cfg.sigma_data
    sds = cfg.sigma_data_size
    bcx, bcy = box.center
    dcx, dcy = det_box.center
    dx = (bcx - dcx) / sd
    dy = (bcy - dcy) / sd
    dw = (math.log(box.width) - math.log(det_box.width)) / sds
    dh = (math.log(box.height) - math.log(det_box.height)) / sds
    norm = 1.0 / (TWO_PI * TWO_PI * sd * sd * sds * sds)
    return norm * math.exp(-0.5 * (dx * dx + dy * dy + dw * dw + dh * dh))


def proposal_density(
    box: BoundingBox,
    predicted_boxes: list[BoundingBox],
    det_box: BoundingBox | None,
    cfg: ChainConfig,
    model: MotionModel,
) -> float:
    """Full mixture density; pure motion when the object has no detection."""
    mix = motion_mixture_density(box, predicted_boxes, model)
    if det_box is None:
        return mix
    return cfg.lambda_motion * mix + cfg.lambda_data * data_proposal_density(box, det_box, cfg)


def propose_move(
    current: SceneParticle,
    prev_samples: list[SceneParticle],
    data_assoc: dict[int, Detection],
    cfg: ChainConfig,
    rng: np.random.Generator,
    motion: MotionModel | None = None,
) -> tuple[SceneParticle, int, float, float]:
    """Draw a one-object move and its forward/reverse proposal densities.

    Picks an object uniformly, then with probability lambda_motion samples
    around a uniformly chosen previous-sample prediction, otherwise around
    the object's associated detection (falling back to the motion component
    when it has none).  Densities are evaluated under the full mixture.
    """
    motion = motion or MotionModel()
    ids = sorted(current.states)
    u = rng.random(3)
    z = rng.standard_normal(4)
    idx = min(int(u[0] * len(ids)), len(ids) - 1)
    identity = ids[idx]
    state = current.states[identity]

    predicted = [
        predict_box(p.states[identity].box, p.states[identity].velocity, motion.velocity_decay)
        for p in prev_samples
        if identity in p.states
    ]
    if not predicted:
        predicted = [state.box]

    det = data_assoc.get(identity)
    if det is not None and u[1] >= cfg.lambda_motion:
        base = det.box
        bcx, bcy = base.center
        cx = bcx + z[0] * cfg.sigma_data
        cy = bcy + z[1] * cfg.sigma_data
        w = base.width * math.exp(z[2] * cfg.sigma_data_size)
        h = base.height * math.exp(z[3] * cfg.sigma_data_size)
    else:
        s_idx = min(int(u[2] * len(predicted)), len(predicted) - 1)
        base = predicted[s_idx]
        bcx, bcy = base.center
        cx = bcx + z[0] * motion.process_sigma_pos
        cy = bcy + z[1] * motion.process_sigma_pos
        w = base.width * math.exp(z[2] * motion.process_sigma_size)
        h = base.height * math.exp(z[3] * motion.process_sigma_size)
    new_box = box_from_c(cx, cy, w, h)

    det_box = det.box if det is not None else None
    q_fwd = proposal_density(new_box, predicted, det_box, cfg, motion)
    q_rev = proposal_density(state.box, predicted, det_box, cfg, motion)

    states = dict(current.states)
    states[identity] = replace(state, box=new_box)
    candidate = SceneParticle(frame=current.frame, states=states)
    return candidate, identity, q_fwd, q_rev


def acceptance_ratio(
    current: SceneParticle,
    candidate: SceneParticle,
    fused_current: float,
    fused_candidate: float,
    q_forward: float,
    q_reverse: float,
    motion_current: float = 1.0,
    motion_candidate: float = 1.0,
) -> float:
    """min(1, [L' * m' * q_rev] / [L * m * q_fwd]) for a one-object move."""
    for name, value in (
        ("fused_current", fused_current),
        ("fused_candidate", fused_candidate),
        ("q_forward", q_forward),
        ("q_reverse", q_reverse),
        ("motion_current", motion_current),
        ("motion_candidate", motion_candidate),
    ):
        if not math.isfinite(value) or value <= 0.0:
            raise ValueError(f"{name} must be positive and finite, got {value}")
    ratio = (fused_candidate * motion_candidate * q_reverse) / (
        fused_current * motion_current * q_forward
    )
    return min(1.0, ratio)
