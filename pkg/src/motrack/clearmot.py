"""CLEAR-MOT evaluation: MOTA, MOTP, identity switches, and track coverage.

Matching follows the standard event-based protocol: correspondences from
the previous frame persist while their overlap stays above the threshold,
the remaining boxes are assigned by maximum total overlap, and an identity
switch is charged when a ground-truth track is picked up by a different
prediction than the one that last covered it.  Ground-truth rows marked
ignored take part in neither the totals nor the false-positive count:
predictions overlapping only an ignored region are discarded silently.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields

import numpy as np
from scipy.optimize import linear_sum_assignment

from .mot_io import TrajectoryRecord, iou

_INFEASIBLE = 1e6


@dataclass(frozen=True)
class EvalConfig:
    """Matching threshold, coverage cutoffs, and class handling."""

    iou_threshold: float = 0.5
    mt_ratio: float = 0.8
    ml_ratio: float = 0.2
    class_mode: str = "ignore"

    def __post_init__(self):
        if not 0.0 < self.iou_threshold <= 1.0:
            raise ValueError(f"iou_threshold must lie in (0, 1], got {self.iou_threshold}")
        if self.class_mode not in ("ignore", "macro"):
            raise ValueError(f"class_mode must be 'ignore' or 'macro', got {self.class_mode!r}")


@dataclass
class MetricReport:
    """Aggregate tracking quality numbers for one evaluation run."""

    mota: float = 1.0
    motp: float = 0.0
    ground_truth_count: int = 0
    false_positives: int = 0
    false_negatives: int = 0
    id_switches: int = 0
    fragmentations: int = 0
    matches: int = 0
    frames: int = 0
    false_alarms_per_frame: float = 0.0
    mostly_tracked: int = 0
    partially_tracked: int = 0
    mostly_lost: int = 0
    track_count: int = 0
    per_class: dict[int, "MetricReport"] = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            if f.name == "per_class":
                out[f.name] = {str(k): v.to_dict() for k, v in self.per_class.items()}
            else:
                out[f.name] = getattr(self, f.name)
        return out


def match_frame(
    gt_rows: list[TrajectoryRecord],
    pred_rows: list[TrajectoryRecord],
    previous: dict[int, int],
    iou_threshold: float,
) -> dict[int, tuple[int, float]]:
    """Match one frame's boxes; returns gt identity -> (pred identity, IoU).

    Pairs matched in the previous frame are kept first whenever their boxes
    still overlap at or above the threshold; everything left is assigned by
    minimizing total (1 - IoU) and filtered by the same threshold.
    """
    gts = sorted(gt_rows, key=lambda r: r.identity)
    preds = sorted(pred_rows, key=lambda r: r.identity)
    pred_by_id = {p.identity: p for p in preds}
    matches: dict[int, tuple[int, float]] = {}
    used_preds: set[int] = set()

    for gt in gts:
        prev_pred = previous.get(gt.identity)
        if prev_pred is None or prev_pred in used_preds:
            continue
        pred = pred_by_id.get(prev_pred)
        if pred is None:
            continue
        overlap = iou(gt.box, pred.box)
        if overlap >= iou_threshold:
            matches[gt.identity] = (prev_pred, overlap)
            used_preds.add(prev_pred)

    rem_gts = [g for g in gts if g.identity not in matches]
    rem_preds = [p for p in preds if p.identity not in used_preds]
    if rem_gts and rem_preds:
        cost = np.full((len(rem_gts), len(rem_preds)), _INFEASIBLE)
        for i, gt in enumerate(rem_gts):
            for j, pred in enumerate(rem_preds):
                overlap = iou(gt.box, pred.box)
                if overlap >= iou_threshold:
                    cost[i, j] = 1.0 - overlap
        rows, cols = linear_sum_assignment(cost)
        for i, j in zip(rows, cols):
            if cost[i, j] < _INFEASIBLE:
                matches[rem_gts[i].identity] = (rem_preds[j].identity, 1.0 - cost[i, j])
    return matches


def _evaluate_single(
    ground_truth: list[TrajectoryRecord],
    predictions: list[TrajectoryRecord],
    cfg: EvalConfig,
) -> MetricReport:
    gt_by_frame: dict[int, list[TrajectoryRecord]] = {}
    ignored_by_frame: dict[int, list[TrajectoryRecord]] = {}
    for rec in ground_truth:
        target = ignored_by_frame if rec.ignored else gt_by_frame
        target.setdefault(rec.frame, []).append(rec)
    pred_by_frame: dict[int, list[TrajectoryRecord]] = {}
    for rec in predictions:
        pred_by_frame.setdefault(rec.frame, []).append(rec)

    frames = sorted(set(gt_by_frame) | set(pred_by_frame) | set(ignored_by_frame))
    report = MetricReport(frames=len(frames))
    last_known: dict[int, int] = {}
    previous: dict[int, int] = {}
    coverage: dict[int, list[bool]] = {}
    motp_sum = 0.0

    for frame in frames:
        gts = gt_by_frame.get(frame, [])
        preds = pred_by_frame.get(frame, [])
        matches = match_frame(gts, preds, previous, cfg.iou_threshold)

        for gt_id, (pred_id, overlap) in sorted(matches.items()):
            known = last_known.get(gt_id)
            if known is not None and known != pred_id:
                report.id_switches += 1
            last_known[gt_id] = pred_id
            motp_sum += overlap
        report.matches += len(matches)
        report.ground_truth_count += len(gts)
        report.false_negatives += len(gts) - len(matches)

        matched_pred_ids = {pid for pid, _ in matches.values()}
        ignored_boxes = [r.box for r in ignored_by_frame.get(frame, [])]
        for pred in preds:
            if pred.identity in matched_pred_ids:
                continue
            if any(iou(pred.box, box) >= cfg.iou_threshold for box in ignored_boxes):
                continue
            report.false_positives += 1

        for gt in gts:
            coverage.setdefault(gt.identity, []).append(gt.identity in matches)
        previous = {gt_id: pred_id for gt_id, (pred_id, _) in matches.items()}

    for flags in coverage.values():
        runs = 0
        inside = False
        for covered in flags:
            if covered and not inside:
                runs += 1
            inside = covered
        if runs:
            report.fragmentations += runs - 1
        ratio = sum(flags) / len(flags)
        if ratio >= cfg.mt_ratio:
            report.mostly_tracked += 1
        elif ratio <= cfg.ml_ratio:
            report.mostly_lost += 1
        else:
            report.partially_tracked += 1
    report.track_count = len(coverage)

    errors = report.false_positives + report.false_negatives + report.id_switches
    report.mota = 1.0 - errors / max(report.ground_truth_count, 1)
    report.motp = motp_sum / report.matches if report.matches else 0.0
    report.false_alarms_per_frame = (
        report.false_positives / report.frames if report.frames else 0.0
    )
    return report


def compute_metrics(
    ground_truth: list[TrajectoryRecord],
    predictions: list[TrajectoryRecord],
    cfg: EvalConfig | None = None,
) -> MetricReport:
    """Evaluate predictions against ground truth.

    ``class_mode='ignore'`` matches across classes as one pool.  In
    ``'macro'`` mode every class is evaluated separately; MOTA and MOTP are
    unweighted means over classes that actually have ground truth, while the
    event counts are summed.  A prediction class absent from the ground
    truth still contributes false positives.
    """
    cfg = cfg or EvalConfig()
    if cfg.class_mode == "ignore":
        return _evaluate_single(ground_truth, predictions, cfg)

    classes = sorted(
        {r.class_id for r in ground_truth} | {r.class_id for r in predictions}
    )
    combined = MetricReport()
    combined.frames = len(
        {r.frame for r in ground_truth} | {r.frame for r in predictions}
    )
    mota_values = []
    motp_values = []
    for class_id in classes:
        sub = _evaluate_single(
            [g for g in ground_truth if g.class_id == class_id],
            [p for p in predictions if p.class_id == class_id],
            cfg,
        )
        combined.per_class[class_id] = sub
        combined.ground_truth_count += sub.ground_truth_count
        combined.false_positives += sub.false_positives
        combined.false_negatives += sub.false_negatives
        combined.id_switches += sub.id_switches
        combined.fragmentations += sub.fragmentations
        combined.matches += sub.matches
        combined.mostly_tracked += sub.mostly_tracked
        combined.partially_tracked += sub.partially_tracked
        combined.mostly_lost += sub.mostly_lost
        combined.track_count += sub.track_count
        if sub.ground_truth_count:
            mota_values.append(sub.mota)
        if sub.matches:
            motp_values.append(sub.motp)
    combined.mota = sum(mota_values) / len(mota_values) if mota_values else 1.0
    combined.motp = sum(motp_values) / len(motp_values) if motp_values else 0.0
    combined.false_alarms_per_frame = (
        combined.false_positives / combined.frames if combined.frames else 0.0
    )
    return combined
