"""CLEAR-MOT evaluation on hand-worked fixtures."""

from __future__ import annotations

import numpy as np
import pytest

from motrack import EvalConfig, compute_metrics

from conftest import gt_record, pred_record


def perfect_pair(frames=5):
    gt, preds = [], []
    for f in range(1, frames + 1):
        gt.append(gt_record(f, 1, 100 + 2 * f, 100))
        gt.append(gt_record(f, 2, 400 - 2 * f, 300))
        preds.append(pred_record(f, 11, 100 + 2 * f, 100))
        preds.append(pred_record(f, 12, 400 - 2 * f, 300))
    return gt, preds


def test_perfect_tracking_scores_one():
    gt, preds = perfect_pair()
    report = compute_metrics(gt, preds)
    assert report.mota == pytest.approx(1.0)
    assert report.motp == pytest.approx(1.0)
    assert report.false_positives == 0
    assert report.false_negatives == 0
    assert report.id_switches == 0
    assert report.fragmentations == 0
    assert report.matches == 10
    assert report.ground_truth_count == 10
    assert report.mostly_tracked == 2
    assert report.track_count == 2


def test_mota_hand_fixture_point_eight():
    """10 GT boxes, one miss plus one spurious box: MOTA = 1 - 2/10 = 0.8."""
    gt, preds = perfect_pair()
    preds = [p for p in preds if not (p.frame == 5 and p.identity == 12)]  # FN
    preds.append(pred_record(2, 99, 900, 900))  # FP far from everything
    report = compute_metrics(gt, preds)
    assert report.false_negatives == 1
    assert report.false_positives == 1
    assert report.id_switches == 0
    assert report.mota == pytest.approx(0.8)
    assert report.motp == pytest.approx(1.0)  # every real match is exact


def test_crossed_tracks_charge_two_switches():
    """Two predictions swap which object they cover mid-sequence: IDSW = 2."""
    gt, preds = [], []
    for f in range(1, 6):
        gt.append(gt_record(f, 1, 100 + 10 * f, 100))
        gt.append(gt_record(f, 2, 400 - 10 * f, 300))
        # Predictions follow their own objects for two frames, then swap.
        if f <= 2:
            preds.append(pred_record(f, 21, 100 + 10 * f, 100))
            preds.append(pred_record(f, 22, 400 - 10 * f, 300))
        else:
            preds.append(pred_record(f, 22, 100 + 10 * f, 100))
            preds.append(pred_record(f, 21, 400 - 10 * f, 300))
    report = compute_metrics(gt, preds)
    assert report.id_switches == 2
    assert report.false_positives == 0
    assert report.false_negatives == 0
    assert report.mota == pytest.approx(1.0 - 2 / 10)
    # Coverage never lapses, so the swap costs no fragmentation.
    assert report.fragmentations == 0


def test_gap_costs_fragmentation_not_switch():
    gt = [gt_record(f, 1, 100, 100) for f in range(1, 11)]
    preds = [
        pred_record(f, 7, 100, 100) for f in (1, 2, 3, 6, 7, 8, 9, 10)
    ]
    report = compute_metrics(gt, preds)
    assert report.false_negatives == 2
    assert report.fragmentations == 1
    assert report.id_switches == 0
    assert report.mota == pytest.approx(0.8)


def test_identity_change_across_gap_counts_switch_and_fragmentation():
    gt = [gt_record(f, 1, 100, 100) for f in range(1, 11)]
    preds = [pred_record(f, 7, 100, 100) for f in (1, 2, 3)]
    preds += [pred_record(f, 8, 100, 100) for f in (6, 7, 8, 9, 10)]
    report = compute_metrics(gt, preds)
    assert report.id_switches == 1  # resumed under a different label
    assert report.fragmentations == 1


def test_continuity_preferred_over_greedy_iou():
    # A slightly offset prediction holds its object even when an exact-IoU
    # newcomer shows up; the newcomer is the false positive.
    gt = [gt_record(f, 1, 100, 100) for f in range(1, 4)]
    preds = [pred_record(f, 5, 102, 100) for f in range(1, 4)]
    preds += [pred_record(f, 6, 100, 100) for f in (2, 3)]
    report = compute_metrics(gt, preds)
    assert report.matches == 3
    assert report.false_positives == 2
    assert report.id_switches == 0


def test_ignored_ground_truth_excluded_both_ways():
    gt, preds = [], []
    for f in range(1, 4):
        gt.append(gt_record(f, 1, 100, 100))
        gt.append(gt_record(f, 2, 500, 100, ignored=True))
        preds.append(pred_record(f, 5, 100, 100))
        preds.append(pred_record(f, 6, 500, 100))  # covers only ignored GT
    report = compute_metrics(gt, preds)
    assert report.ground_truth_count == 3  # ignored rows don't count
    assert report.matches == 3
    # Predictions overlapping ignored regions are discarded, not penalized.
    assert report.false_positives == 0
    assert report.false_negatives == 0
    assert report.mota == pytest.approx(1.0)


def test_motp_is_mean_matched_iou():
    gt = [gt_record(1, 1, 100, 100), gt_record(2, 1, 100, 100)]
    preds = [pred_record(1, 5, 102, 100), pred_record(2, 5, 100, 100)]
    report = compute_metrics(gt, preds)
    # 2 px shift of a 40 px-wide box: IoU = 38/42; second frame exact.
    assert report.motp == pytest.approx((38.0 / 42.0 + 1.0) / 2.0, abs=1e-9)


def test_mostly_tracked_partially_tracked_mostly_lost():
    gt, preds = [], []
    for f in range(1, 11):
        gt.append(gt_record(f, 1, 100, 100))
        gt.append(gt_record(f, 2, 400, 100))
        gt.append(gt_record(f, 3, 700, 100))
    preds += [pred_record(f, 11, 100, 100) for f in range(1, 10)]  # 9/10
    preds += [pred_record(1, 12, 400, 100)]  # 1/10
    preds += [pred_record(f, 13, 700, 100) for f in range(1, 6)]  # 5/10
    report = compute_metrics(gt, preds)
    assert report.mostly_tracked == 1
    assert report.mostly_lost == 1
    assert report.partially_tracked == 1
    assert report.track_count == 3


def test_class_mode_ignore_versus_macro():
    gt, preds = [], []
    for f in range(1, 4):
        gt.append(gt_record(f, 1, 100, 100, class_id=1))
        gt.append(gt_record(f, 2, 400, 100, class_id=2))
        preds.append(pred_record(f, 5, 100, 100, class_id=1))
        # The second object is tracked with the wrong class label.
        preds.append(pred_record(f, 6, 400, 100, class_id=1))
    pooled = compute_metrics(gt, preds, EvalConfig(class_mode="ignore"))
    assert pooled.mota == pytest.approx(1.0)
    macro = compute_metrics(gt, preds, EvalConfig(class_mode="macro"))
    # Class 1: 3 GT, 6 preds -> 3 FP.  Class 2: 3 GT, no preds -> 3 FN.
    assert macro.per_class[1].false_positives == 3
    assert macro.per_class[2].false_negatives == 3
    assert macro.per_class[1].mota == pytest.approx(0.0)
    assert macro.per_class[2].mota == pytest.approx(0.0)
    assert macro.mota == pytest.approx(0.0)
    assert macro.false_positives == 3 and macro.false_negatives == 3


def test_relabeling_invariance_100_permutations():
    """Prediction identity labels are arbitrary; any consistent relabeling
    must leave every metric untouched."""
    rng = np.random.Generator(np.random.PCG64(11))
    gt, preds = [], []
    for f in range(1, 41):
        for obj, (cx, cy, vx) in enumerate(
            [(100.0, 100.0, 3.0), (500.0, 300.0, -2.0), (900.0, 500.0, 1.0)], start=1
        ):
            gt.append(gt_record(f, obj, cx + vx * f, cy))
            if rng.random() < 0.9:  # a few misses keep the fixture honest
                jx, jy = rng.normal(0.0, 2.0, size=2)
                preds.append(
                    pred_record(f, 100 + obj, cx + vx * f + jx, cy + jy)
                )
        if rng.random() < 0.2:
            preds.append(pred_record(f, 999, 1500.0, 900.0))  # clutter
    base = compute_metrics(gt, preds)
    baseline = (
        base.mota,
        base.motp,
        base.false_positives,
        base.false_negatives,
        base.id_switches,
        base.fragmentations,
    )
    labels = sorted({p.identity for p in preds})
    for trial in range(100):
        perm_rng = np.random.Generator(np.random.PCG64(500 + trial))
        shuffled = list(perm_rng.permutation(labels))
        mapping = {
            old: 1000 * (trial + 1) + int(new) for old, new in zip(labels, shuffled)
        }
        relabeled = [
            pred_record(
                p.frame,
                mapping[p.identity],
                p.box.left + p.box.width / 2.0,
                p.box.top + p.box.height / 2.0,
                p.box.width,
                p.box.height,
            )
            for p in preds
        ]
        report = compute_metrics(gt, relabeled)
        assert (
            report.mota,
            report.motp,
            report.false_positives,
            report.false_negatives,
            report.id_switches,
            report.fragmentations,
        ) == baseline


def test_empty_inputs():
    report = compute_metrics([], [])
    assert report.mota == 1.0
    assert report.matches == 0
    only_preds = compute_metrics([], [pred_record(1, 1, 100, 100)])
    assert only_preds.false_positives == 1


def test_eval_config_validation():
    with pytest.raises(ValueError):
        EvalConfig(iou_threshold=0.0)
    with pytest.raises(ValueError):
        EvalConfig(class_mode="micro")
