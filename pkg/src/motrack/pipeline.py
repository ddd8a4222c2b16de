"""End-to-end tracking: transitions, per-frame sampling, and post-processing.

Per frame the tracker resolves births and deaths, then refines all live
object states with one Metropolis-Hastings chain at fixed dimension.  When
the sequence ends, every closed segment is scored for change points,
re-tracked backward for confirmation, truncated where it drifted, filtered
by mean likelihood, linked across short detection gaps, and finally clamped
to the (slightly extended) image canvas.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, fields, replace

import numpy as np

from . import backend
from .cpd import CpdConfig, LikelihoodSeries, change_point_scores
from .errors import ConfigError, ContractViolation
from .mot_io import BoundingBox, Detection, SequenceInfo, TrajectoryRecord, group_by_frame
from .motion import (
    EntityTransitionResult,
    EntryModel,
    MotionModel,
    TrackContext,
    estimate_entity_transitions,
    predict_state,
)
from .observation import DetectorWeightSet, ObjectState, ObservationParams
from .sampler import (
    STREAM_FORWARD,
    ChainConfig,
    ChainInputs,
    appearance_factors,
    argmax_detection,
    box_from_c,
    box_to_c,
    run_chain_arrays,
)
from .validation import TrackSegment, reverse_track, split_segment, validate_segment


@dataclass(frozen=True)
class TrackingConfig:
    """Every knob of the pipeline, flat so it can be snapshotted verbatim."""

    # sampler
    n_samples: int = 100
    burn_in: int = 30
    lambda_motion: float = 0.5
    sigma_data: float = 4.0
    sigma_data_size: float = 0.05
    seed: int = 0
    # motion model
    process_sigma_pos: float = 2.0
    process_sigma_size: float = 0.05
    velocity_decay: float = 1.0
    velocity_smoothing: float = 0.5
    # entity entry/exit gating
    border_margin: float = 50.0
    beta_border: float = 0.9
    beta_interior: float = 0.3
    birth_threshold: float = 0.4
    birth_prob_min: float = 0.2
    miss_tolerance: int = 8
    match_iou: float = 0.3
    # observation fusion
    gate_iou: float = 0.3
    detection_floor: float = 0.01
    fusion_floor: float = 0.01
    sigma_color: float = 0.5
    sigma_motion: float = 0.7
    weight_detection: float = 1.0 / 3.0
    weight_appearance: float = 1.0 / 3.0
    weight_motion: float = 1.0 / 3.0
    # change-point scoring
    cpd_order: int = 2
    cpd_discount: float = 0.05
    cpd_window: int = 5
    cpd_threshold: float = 0.3
    cpd_refractory: int = 10
    cpd_warmup: int = 20
    cpd_z_offset: float = 20.0
    # validation and post-processing
    fb_ratio: float = 0.5
    min_avg_score: float = 0.3
    min_matches: int = 2
    gap_link_frames: int = 15
    gap_link_ratio: float = 0.5
    canvas_margin_ratio: float = 0.1
    backend: str = "auto"

    def chain(self) -> ChainConfig:
        return ChainConfig(
            n_samples=self.n_samples,
            burn_in=self.burn_in,
            lambda_motion=self.lambda_motion,
            sigma_data=self.sigma_data,
            sigma_data_size=self.sigma_data_size,
            seed=self.seed,
        )

    def motion(self) -> MotionModel:
        return MotionModel(
            process_sigma_pos=self.process_sigma_pos,
            process_sigma_size=self.process_sigma_size,
            velocity_decay=self.velocity_decay,
            velocity_smoothing=self.velocity_smoothing,
        )

    def entry(self) -> EntryModel:
        return EntryModel(
            border_margin=self.border_margin,
            beta_border=self.beta_border,
            beta_interior=self.beta_interior,
            birth_threshold=self.birth_threshold,
            birth_prob_min=self.birth_prob_min,
            miss_tolerance=self.miss_tolerance,
            match_iou=self.match_iou,
        )

    def observation(self) -> ObservationParams:
        return ObservationParams(
            gate_iou=self.gate_iou,
            detection_floor=self.detection_floor,
            fusion_floor=self.fusion_floor,
            sigma_color=self.sigma_color,
            sigma_motion=self.sigma_motion,
        )

    def weights(self) -> DetectorWeightSet:
        return DetectorWeightSet(
            {
                "detection": self.weight_detection,
                "appearance": self.weight_appearance,
                "motion": self.weight_motion,
            }
        )

    def cpd(self) -> CpdConfig:
        return CpdConfig(
            order=self.cpd_order,
            discount=self.cpd_discount,
            window=self.cpd_window,
            threshold=self.cpd_threshold,
            refractory=self.cpd_refractory,
            warmup=self.cpd_warmup,
            z_offset=self.cpd_z_offset,
        )

    def to_flat(self) -> dict:
        """Field-order dict of plain scalars (JSON-ready)."""
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_flat(cls, mapping: dict) -> "TrackingConfig":
        """Build a config from a flat mapping, rejecting unknown keys."""
        known = {f.name: f for f in fields(cls)}
        unknown = sorted(set(mapping) - set(known))
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
        values = {}
        for name, raw in mapping.items():
            values[name] = coerce_option(name, raw, known[name].type)
        try:
            return cls(**values)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc


def coerce_option(name: str, raw, type_name: str):
    """Convert a string/number option to the config field's declared type."""
    try:
        if type_name == "str":
            return str(raw)
        if type_name == "int":
            value = float(raw)
            if value != int(value):
                raise ValueError(f"expected an integer, got {raw!r}")
            return int(value)
        return float(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"config key {name!r}: {exc}") from exc


@dataclass
class LiveTrack:
    """Mutable per-identity state while a track is open.

    ``anchor_center``/``anchor_frame`` remember the last matched detection;
    velocity is estimated from detection-to-detection displacement rather
    than from sampled boxes, whose residual jitter would otherwise feed back
    into the motion prediction.
    """

    identity: int
    class_id: int
    state: ObjectState
    birth_frame: int
    frames: list[int]
    boxes: list[BoundingBox]
    scores: list[float]
    matched: list[bool]
    anchor_center: tuple[float, float]
    anchor_frame: int
    misses: int = 0
    velocity_seen: bool = False


@dataclass
class RunReport:
    """Counters and timings from one tracking run."""

    frames: int = 0
    tracks_born: int = 0
    tracks_died: int = 0
    segments_emitted: int = 0
    segments_confirmed: int = 0
    segments_truncated: int = 0
    segments_dropped: int = 0
    change_points_total: int = 0
    fb_invocations: int = 0
    gap_links: int = 0
    records: int = 0
    accepted_moves: int = 0
    total_moves: int = 0
    backend: str = ""
    wall_time: float = 0.0
    fps: float = 0.0

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


class Tracker:
    """Streaming tracker: feed frames in order, then finalize once."""

    def __init__(self, config: TrackingConfig, info: SequenceInfo):
        self.config = config
        self.info = info
        self._backend_name = backend.resolve_name(config.backend)
        self._kernel = backend.get_kernel(self._backend_name)
        self._chain = config.chain()
        self._motion = config.motion()
        self._entry = config.entry()
        self._obs = config.observation()
        self._weights = config.weights()
        self._live: dict[int, LiveTrack] = {}
        self._prev_samples: dict[int, np.ndarray] = {}
        self._segments: list[TrackSegment] = []
        self._detections_by_frame: dict[int, list[Detection]] = {}
        self._no_link: set[tuple[int, int]] = set()
        self._next_identity = 1
        self._next_segment = 1
        self._last_frame = 0
        self._finalized = False
        self.segments: list[TrackSegment] = []
        self.report = RunReport(backend=self._backend_name)

    # -- per-frame ---------------------------------------------------------

    def step_frame(self, frame: int, detections: list[Detection]) -> EntityTransitionResult:
        """Advance the tracker by one frame; returns the transition audit."""
        if self._finalized:
            raise ContractViolation("tracker already finalized")
        if frame <= self._last_frame:
            raise ContractViolation(
                f"frames must be fed in ascending order, got {frame} after {self._last_frame}"
            )
        self._last_frame = frame
        self.report.frames += 1
        self._detections_by_frame[frame] = list(detections)

        contexts = [
            TrackContext(
                state=track.state,
                misses=track.misses,
                last_likelihood=track.scores[-1] if track.scores else 1.0,
            )
            for _, track in sorted(self._live.items())
        ]
        result = estimate_entity_transitions(
            contexts,
            detections,
            self._entry,
            frame,
            self._motion,
            (self.info.image_width, self.info.image_height),
            next_identity=self._next_identity,
        )
        self._next_identity += len(result.births)

        for death in result.deaths:
            self._close_track(self._live.pop(death.identity))
            self.report.tracks_died += 1

        born = set()
        for cand in result.births:
            det = cand.detection
            state = ObjectState(
                identity=cand.identity,
                class_id=det.class_id,
                box=det.box,
                velocity=(0.0, 0.0),
                appearance_ref=det.appearance,
            )
            self._live[cand.identity] = LiveTrack(
                identity=cand.identity,
                class_id=det.class_id,
                state=state,
                birth_frame=frame,
                frames=[],
                boxes=[],
                scores=[],
                matched=[],
                anchor_center=det.box.center,
                anchor_frame=frame,
            )
            born.add(cand.identity)
            self.report.tracks_born += 1

        if not self._live:
            return result

        init_states: dict[int, ObjectState] = {}
        for identity, track in self._live.items():
            if identity in born:
                init_states[identity] = track.state
            else:
                init_states[identity] = replace(
                    track.state, box=predict_state(track.state, self._motion)
                )
        inp = self._pack_inputs(frame, init_states, detections)
        out = run_chain_arrays(
            inp,
            self._chain,
            self._motion,
            self._obs,
            self._weights,
            stream=STREAM_FORWARD,
            kernel=self._kernel,
        )
        self.report.accepted_moves += out.accepted
        self.report.total_moves += self._chain.burn_in + self._chain.n_samples

        alpha = self._motion.velocity_smoothing
        for col, identity in enumerate(inp.ids):
            track = self._live[identity]
            new_box = box_from_c(*out.samples[out.map_index, col])
            likelihood = float(out.obj_likelihood[out.map_index, col])
            matched = identity in born or identity in result.matches
            velocity = track.state.velocity
            appearance = track.state.appearance_ref
            det = result.matches.get(identity)
            if det is not None:
                # Velocity from detection displacement since the last match;
                # the span divides out any coasted frames in between.
                span = frame - track.anchor_frame
                if span > 0:
                    dcx, dcy = det.box.center
                    vx = (dcx - track.anchor_center[0]) / span
                    vy = (dcy - track.anchor_center[1]) / span
                    if track.velocity_seen:
                        velocity = (
                            (1.0 - alpha) * velocity[0] + alpha * vx,
                            (1.0 - alpha) * velocity[1] + alpha * vy,
                        )
                    else:
                        velocity = (vx, vy)
                        track.velocity_seen = True
                track.anchor_center = det.box.center
                track.anchor_frame = frame
                if det.appearance is not None:
                    appearance = det.appearance
            # The reported box is the MAP sample, but the carried state box is
            # re-anchored on the matched detection: detection noise is white,
            # while anchoring predictions on sampled boxes would integrate
            # sampler jitter into a random walk.
            state_box = det.box if det is not None else new_box
            track.state = replace(
                track.state, box=state_box, velocity=velocity, appearance_ref=appearance
            )
            track.frames.append(frame)
            track.boxes.append(new_box)
            track.scores.append(likelihood)
            track.matched.append(matched)
            track.misses = 0 if matched else track.misses + 1
            self._prev_samples[identity] = out.samples[:, col, :]
        return result

    def _pack_inputs(
        self, frame: int, states: dict[int, ObjectState], detections: list[Detection]
    ) -> ChainInputs:
        ids = sorted(states)
        ordered = [states[i] for i in ids]
        boxes = np.array([box_to_c(s.box) for s in ordered], dtype=np.float64)
        n = len(ids)
        if self._prev_samples:
            depth = next(iter(self._prev_samples.values())).shape[0]
            prev = np.empty((depth, n, 4), dtype=np.float64)
            for col, identity in enumerate(ids):
                stored = self._prev_samples.get(identity)
                prev[:, col, :] = boxes[col] if stored is None else stored
        else:
            prev = boxes[None, :, :].copy()
        det_boxes = np.array(
            [box_to_c(d.box) for d in detections], dtype=np.float64
        ).reshape(len(detections), 4)
        return ChainInputs(
            frame=frame,
            ids=ids,
            boxes=boxes,
            classes=np.array([s.class_id for s in ordered], dtype=np.int64),
            velocities=np.array([s.velocity for s in ordered], dtype=np.float64),
            prev_boxes=prev,
            det_boxes=det_boxes,
            det_conf=np.array([d.confidence for d in detections], dtype=np.float64),
            det_classes=np.array([d.class_id for d in detections], dtype=np.int64),
            assoc=np.array(
                [argmax_detection(s, detections, self._obs.gate_iou) for s in ordered],
                dtype=np.int64,
            ),
            app_factor=appearance_factors(ordered, detections, self._obs.sigma_color),
        )

    # -- closing and post-processing ----------------------------------------

    def _close_track(self, track: LiveTrack) -> None:
        """Bank the track as a segment, trailing coasted frames trimmed.

        Interior coasted frames stay (they bridge detector dropouts), but
        the unmatched run at the very end is pure extrapolation with no
        detection ever landing on it, so it is cut back to the last
        supported frame.
        """
        self._prev_samples.pop(track.identity, None)
        keep = len(track.matched)
        while keep > 0 and not track.matched[keep - 1]:
            keep -= 1
        if keep == 0:
            return
        self._segments.append(
            TrackSegment(
                segment_id=self._next_segment,
                identity=track.identity,
                class_id=track.class_id,
                frames=tuple(track.frames[:keep]),
                boxes=tuple(track.boxes[:keep]),
                scores=tuple(track.scores[:keep]),
                matched=tuple(track.matched[:keep]),
                terminal_velocity=track.state.velocity,
            )
        )
        self._next_segment += 1

    def finalize(self) -> tuple[list[TrajectoryRecord], RunReport]:
        """Close open tracks, validate and post-process, emit records."""
        if self._finalized:
            raise ContractViolation("tracker already finalized")
        self._finalized = True
        for identity in sorted(self._live):
            self._close_track(self._live.pop(identity))

        validated: list[TrackSegment] = []
        for segment in self._segments:
            scored = change_point_scores(
                LikelihoodSeries(segment.segment_id, segment.frames, segment.scores),
                self.config.cpd(),
            )
            self.report.change_points_total += len(scored.detected_points)
            if not scored.detected_points:
                # No flagged change point: the segment stands without the
                # (expensive) backward re-tracking pass.
                validated.append(segment)
                continue
            self.report.fb_invocations += 1
            backward = reverse_track(
                segment,
                self._detections_by_frame,
                self._chain,
                motion=self._motion,
                obs=self._obs,
                weights=self._weights,
                kernel=self._kernel,
            )
            verdict = validate_segment(segment, backward, self.config.fb_ratio)
            if verdict.confirmed:
                self.report.segments_confirmed += 1
                validated.append(segment)
                continue
            cut = min(scored.detected_points)
            head, tail = split_segment(segment, cut, tail_segment_id=self._next_segment)
            self._next_segment += 1
            self.report.segments_truncated += 1
            if tail is not None:
                tail = replace(tail, identity=self._next_identity)
                self._next_identity += 1
            if head is not None and tail is not None:
                self._no_link.add((head.segment_id, tail.segment_id))
            for piece in (head, tail):
                if piece is not None:
                    validated.append(piece)

        kept: list[TrackSegment] = []
        for segment in validated:
            confirmed = segment.match_count() >= self.config.min_matches
            if confirmed and (
                sum(segment.scores) / len(segment.scores) >= self.config.min_avg_score
            ):
                kept.append(segment)
            else:
                self.report.segments_dropped += 1

        identity_of = self._link_gaps(kept)
        records = self._emit(kept, identity_of)
        self.report.segments_emitted = len(kept)
        self.report.records = len(records)
        self.segments = kept
        return records, self.report

    def _link_gaps(self, segments: list[TrackSegment]) -> dict[int, int]:
        """Greedy same-class linking across short gaps; returns id relabeling.

        The earlier segment is extrapolated at constant velocity across the
        gap; a link forms when that extrapolation lands near the later
        segment's birth box.
        """
        ordered = sorted(segments, key=lambda s: (s.start, s.segment_id))
        candidates = []
        for a in ordered:
            for b in ordered:
                if a.segment_id == b.segment_id or a.class_id != b.class_id:
                    continue
                gap = b.start - a.end
                if not 1 <= gap <= self.config.gap_link_frames:
                    continue
                if (a.segment_id, b.segment_id) in self._no_link:
                    continue
                acx, acy = a.boxes[-1].center
                acx += a.terminal_velocity[0] * gap
                acy += a.terminal_velocity[1] * gap
                bcx, bcy = b.boxes[0].center
                distance = math.hypot(bcx - acx, bcy - acy)
                radius = self.config.gap_link_ratio * 0.5 * (
                    a.mean_diagonal() + b.mean_diagonal()
                )
                if distance <= radius:
                    candidates.append((gap, distance, a.segment_id, b.segment_id))
        candidates.sort()
        used_tail: set[int] = set()
        used_head: set[int] = set()
        parent: dict[int, int] = {}
        for gap, distance, a_id, b_id in candidates:
            if a_id in used_tail or b_id in used_head:
                continue
            used_tail.add(a_id)
            used_head.add(b_id)
            parent[b_id] = a_id
            self.report.gap_links += 1

        identity_of: dict[int, int] = {}
        for segment in ordered:
            if segment.segment_id in parent:
                identity_of[segment.segment_id] = identity_of[parent[segment.segment_id]]
            else:
                identity_of[segment.segment_id] = segment.identity
        return identity_of

    def _emit(
        self, segments: list[TrackSegment], identity_of: dict[int, int]
    ) -> list[TrajectoryRecord]:
        """Clamp boxes to the extended canvas and produce output records."""
        margin_x = self.config.canvas_margin_ratio * self.info.image_width
        margin_y = self.config.canvas_margin_ratio * self.info.image_height
        lo_x, hi_x = -margin_x, self.info.image_width + margin_x
        lo_y, hi_y = -margin_y, self.info.image_height + margin_y
        records: list[TrajectoryRecord] = []
        for segment in sorted(segments, key=lambda s: (s.start, s.segment_id)):
            identity = identity_of[segment.segment_id]
            for frame, box, score in zip(segment.frames, segment.boxes, segment.scores):
                left = max(box.left, lo_x)
                right = min(box.right, hi_x)
                top = max(box.top, lo_y)
                bottom = min(box.bottom, hi_y)
                if right - left <= 1e-9 or bottom - top <= 1e-9:
                    continue
                records.append(
                    TrajectoryRecord(
                        frame=frame,
                        identity=identity,
                        class_id=segment.class_id,
                        box=BoundingBox(left, top, right - left, bottom - top),
                        score=min(max(score, 0.0), 1.0),
                    )
                )
        return records


def track_sequence(
    detections: list[Detection],
    info: SequenceInfo,
    config: TrackingConfig | None = None,
) -> tuple[list[TrajectoryRecord], RunReport]:
    """Track a whole sequence; fps counts tracking time only, not parsing."""
    config = config or TrackingConfig()
    tracker = Tracker(config, info)
    by_frame = group_by_frame(detections)
    start = time.perf_counter()
    for frame in range(1, info.frame_count + 1):
        tracker.step_frame(frame, by_frame.get(frame, []))
    records, report = tracker.finalize()
    report.wall_time = time.perf_counter() - start
    report.fps = report.frames / report.wall_time if report.wall_time > 0 else float("inf")
    return records, report
