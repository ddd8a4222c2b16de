"""Release acceptance gate: nine criteria, one printed verdict line each.

Every test computes its criterion end to end, emits a single
``PASS criterion N: ...`` / ``FAIL criterion N: ...`` line that bypasses
pytest's capture (so it is visible in any run mode), and then asserts.
"""

from __future__ import annotations

import json
import math
import statistics
import time

import numpy as np
import pytest

from motrack import (
    BoundingBox,
    CpdConfig,
    DetectorWeightSet,
    EntryModel,
    LikelihoodSeries,
    MotionModel,
    SceneParticle,
    TrackingConfig,
    TrajectoryRecord,
    change_point_scores,
    compute_metrics,
    estimate_entity_transitions,
    fuse_likelihoods,
    generate_scenario,
    linear_scenario,
    load_sequence_info,
    parse_detections,
    parse_ground_truth,
    parse_trajectories,
    track_sequence,
    write_trajectories,
)
from motrack.cli import main as cli_main
from motrack.motion import TrackContext
from motrack.observation import ObjectState, bhattacharyya_distance
from motrack.sampler import acceptance_ratio

from conftest import DATA_DIR, box, det, gt_record, pred_record


def verdict(capsys, ok: bool, number: int, detail: str) -> bool:
    with capsys.disabled():
        print(f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}", flush=True)
    return ok


# ---------------------------------------------------------------------------
# 1. Perfect sequence is tracked perfectly, and quickly
# ---------------------------------------------------------------------------


def test_criterion_1_perfect_sequence(capsys):
    """10 objects, 300 noiseless frames: MOTA 1.0, no switches, < 30 s."""
    spec = linear_scenario(
        n_objects=10, frame_count=300, image_width=1920, image_height=1080
    )
    data = generate_scenario(spec)
    start = time.perf_counter()
    records, report = track_sequence(data.detections, data.info, TrackingConfig())
    elapsed = time.perf_counter() - start
    metrics = compute_metrics(data.ground_truth, records)
    ok = (
        metrics.mota == 1.0
        and metrics.id_switches == 0
        and metrics.fragmentations == 0
        and elapsed < 30.0
    )
    verdict(
        capsys,
        ok,
        1,
        f"perfect sequence MOTA={metrics.mota:.4f} IDSW={metrics.id_switches} "
        f"Frag={metrics.fragmentations} wall={elapsed:.1f}s (limit 30s, "
        f"{report.backend} backend)",
    )
    assert metrics.mota == 1.0
    assert metrics.id_switches == 0
    assert metrics.fragmentations == 0
    assert elapsed < 30.0


# ---------------------------------------------------------------------------
# 2. Corrupted sequences stay above the recorded accuracy floor
# ---------------------------------------------------------------------------


def test_criterion_2_noisy_robustness(capsys):
    """Median MOTA over twenty disjoint seeds of the standard corruption
    scenario (jitter sigma 2 px, 10% misses, 0.5 clutter/frame) >= 0.95."""
    motas = []
    for seed in range(201, 221):
        spec = linear_scenario(
            n_objects=10,
            frame_count=300,
            image_width=1920,
            image_height=1080,
            seed=seed,
            noise_sigma=2.0,
            false_negative_rate=0.1,
            clutter_rate=0.5,
        )
        data = generate_scenario(spec)
        records, _ = track_sequence(data.detections, data.info, TrackingConfig())
        motas.append(compute_metrics(data.ground_truth, records).mota)
    median = statistics.median(motas)
    ok = median >= 0.95
    verdict(
        capsys,
        ok,
        2,
        f"noisy robustness median MOTA={median:.4f} over seeds 201-220 "
        f"(floor 0.95, min {min(motas):.4f})",
    )
    assert median >= 0.95


# ---------------------------------------------------------------------------
# 3. Change-point detection: sensitivity and selectivity
# ---------------------------------------------------------------------------


def _collapse_series(index: int) -> tuple[LikelihoodSeries, int]:
    rng = np.random.Generator(np.random.PCG64(900 + index))
    injection = int(rng.integers(80, 221))
    high = float(rng.uniform(0.75, 0.95))
    low = float(rng.uniform(0.05, 0.35))
    values = np.full(300, high)
    values[injection - 1 :] = low
    values = np.clip(values + rng.standard_normal(300) * 0.05, 1e-3, 1.0)
    series = LikelihoodSeries(
        segment_id=index,
        frames=tuple(range(1, 301)),
        values=tuple(float(v) for v in values),
    )
    return series, injection


def _clean_series(index: int) -> LikelihoodSeries:
    rng = np.random.Generator(np.random.PCG64(1700 + index))
    level = float(rng.uniform(0.6, 0.95))
    values = np.clip(level + rng.standard_normal(300) * 0.05, 1e-3, 1.0)
    return LikelihoodSeries(
        segment_id=index,
        frames=tuple(range(1, 301)),
        values=tuple(float(v) for v in values),
    )


def test_criterion_3_change_point_families(capsys):
    """>= 90/100 seeded collapses localized within +-5 frames, while 100
    clean constant-level series average <= 0.2 spurious detections."""
    cfg = CpdConfig()
    hits = 0
    for i in range(100):
        series, injection = _collapse_series(i)
        detected = change_point_scores(series, cfg).detected_points
        if detected and min(abs(f - injection) for f in detected) <= 5:
            hits += 1
    false_alarms = sum(
        len(change_point_scores(_clean_series(i), cfg).detected_points)
        for i in range(100)
    )
    fa_mean = false_alarms / 100.0
    ok = hits >= 90 and fa_mean <= 0.2
    verdict(
        capsys,
        ok,
        3,
        f"change points {hits}/100 collapses within +-5 frames (need >= 90), "
        f"clean-series false alarms {fa_mean:.2f}/series (cap 0.2)",
    )
    assert hits >= 90
    assert fa_mean <= 0.2


# ---------------------------------------------------------------------------
# 4. Sampler targets the posterior it claims to
# ---------------------------------------------------------------------------


def test_criterion_4_chain_stationary_law(capsys):
    """The acceptance rule on an enumerable 5-state problem reproduces the
    normalized target within 0.05 total variation over 10k samples."""
    target = [0.05, 0.10, 0.50, 0.25, 0.10]
    rng = np.random.Generator(np.random.PCG64(42))
    dummy = SceneParticle(frame=1, states={1: ObjectState(1, 1, box(0, 0, 10, 10))})
    state = 2
    counts = np.zeros(5)
    burn_in, retained = 500, 10_000
    for step in range(burn_in + retained):
        candidate = int(rng.integers(0, 5))
        alpha = acceptance_ratio(
            dummy,
            dummy,
            fused_current=target[state],
            fused_candidate=target[candidate],
            q_forward=0.2,
            q_reverse=0.2,
        )
        if rng.random() < alpha:
            state = candidate
        if step >= burn_in:
            counts[state] += 1
    tv = 0.5 * float(np.abs(counts / retained - np.array(target)).sum())
    ok = tv <= 0.05
    verdict(
        capsys, ok, 4, f"5-state chain total variation {tv:.4f} at 10k (cap 0.05)"
    )
    assert tv <= 0.05


# ---------------------------------------------------------------------------
# 5. Probability identities hold exactly
# ---------------------------------------------------------------------------


def test_criterion_5_probability_identities(capsys):
    """Fusion geometric mean, Bhattacharyya anchors, and the four-case
    birth/death/alive/null complement audit at 1e-9."""
    fused = fuse_likelihoods(
        {"a": 0.9, "b": 0.4}, DetectorWeightSet.equal(["a", "b"]), floor=0.0
    )
    fusion_ok = abs(fused.value - 0.6) < 1e-9

    d_same = bhattacharyya_distance((1.0, 0.0), (1.0, 0.0))
    d_disjoint = bhattacharyya_distance((1.0, 0.0), (0.0, 1.0))
    d_mixed = bhattacharyya_distance((0.9, 0.1), (0.5, 0.5))
    bhat_ok = (
        d_same == 0.0 and d_disjoint == 1.0 and abs(d_mixed - 0.324920) <= 1e-5
    )

    # One frame that exercises all four entity events at once.
    def ctx(identity, cx, cy, misses=0, last_likelihood=1.0):
        state = ObjectState(identity, 1, box(cx, cy, 40, 80), (0.0, 0.0))
        return TrackContext(state=state, misses=misses, last_likelihood=last_likelihood)

    result = estimate_entity_transitions(
        [ctx(1, 100, 100, last_likelihood=0.7), ctx(2, 600, 900, misses=7, last_likelihood=0.4)],
        [
            det(5, 101, 100, confidence=0.8),  # matches track 1 -> alive
            det(5, 30, 500, confidence=0.9),  # border, unmatched -> birth
            det(5, 960, 540, confidence=0.5),  # interior, weak -> null
        ],
        EntryModel(miss_tolerance=8),
        5,
        MotionModel(),
        (1920, 1080),
    )
    # One status per track (alive/death) plus one per detection (birth/null).
    audit_ok = {s.case for s in result.statuses} == {"alive", "birth", "death", "null"}
    for status in result.statuses:
        if status.case in ("alive", "death"):
            audit_ok &= abs(status.alive - (1.0 - status.death)) <= 1e-9
            audit_ok &= status.birth == 0.0 and status.null == 0.0
        else:
            audit_ok &= abs(status.null - (1.0 - status.birth)) <= 1e-9
            audit_ok &= status.death == 0.0 and status.alive == 0.0

    ok = fusion_ok and bhat_ok and audit_ok
    verdict(
        capsys,
        ok,
        5,
        f"identities fused(0.9,0.4)={fused.value:.10f} (target 0.6), "
        f"Bhattacharyya anchors ({d_same:.1f}, {d_disjoint:.1f}, {d_mixed:.6f}), "
        f"four-case audit {'clean' if audit_ok else 'VIOLATED'} at 1e-9",
    )
    assert fusion_ok and bhat_ok and audit_ok


# ---------------------------------------------------------------------------
# 6. Evaluation metrics match hand-worked fixtures
# ---------------------------------------------------------------------------


def test_criterion_6_metric_fixtures(capsys):
    """MOTA 0.8 fixture, crossed tracks charging two switches, and metric
    invariance under 100 random relabelings of prediction identities."""
    # (a) one miss plus one spurious box out of ten: MOTA = 0.8 exactly.
    gt, preds = [], []
    for f in range(1, 6):
        gt.append(gt_record(f, 1, 100 + 2 * f, 100))
        gt.append(gt_record(f, 2, 400 - 2 * f, 300))
        preds.append(pred_record(f, 11, 100 + 2 * f, 100))
        if f != 5:
            preds.append(pred_record(f, 12, 400 - 2 * f, 300))
    preds.append(pred_record(2, 99, 900, 900))
    mota_report = compute_metrics(gt, preds)
    mota_ok = (
        math.isclose(mota_report.mota, 0.8)
        and mota_report.false_positives == 1
        and mota_report.false_negatives == 1
    )

    # (b) two predictions swap objects mid-sequence: exactly two switches.
    gt, preds = [], []
    for f in range(1, 6):
        gt.append(gt_record(f, 1, 100 + 10 * f, 100))
        gt.append(gt_record(f, 2, 400 - 10 * f, 300))
        first, second = (21, 22) if f <= 2 else (22, 21)
        preds.append(pred_record(f, first, 100 + 10 * f, 100))
        preds.append(pred_record(f, second, 400 - 10 * f, 300))
    swap_report = compute_metrics(gt, preds)
    swap_ok = swap_report.id_switches == 2 and swap_report.fragmentations == 0

    # (c) relabeling prediction identities never moves any metric.
    rng = np.random.Generator(np.random.PCG64(11))
    gt, preds = [], []
    for f in range(1, 41):
        for obj, (cx, cy, vx) in enumerate(
            [(100.0, 100.0, 3.0), (500.0, 300.0, -2.0), (900.0, 500.0, 1.0)], start=1
        ):
            gt.append(gt_record(f, obj, cx + vx * f, cy))
            if rng.random() < 0.9:
                jx, jy = rng.normal(0.0, 2.0, size=2)
                preds.append(pred_record(f, 100 + obj, cx + vx * f + jx, cy + jy))
        if rng.random() < 0.2:
            preds.append(pred_record(f, 999, 1500.0, 900.0))
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
    invariant = True
    for trial in range(100):
        perm_rng = np.random.Generator(np.random.PCG64(500 + trial))
        mapping = {
            old: 1000 * (trial + 1) + int(new)
            for old, new in zip(labels, perm_rng.permutation(labels))
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
        invariant &= baseline == (
            report.mota,
            report.motp,
            report.false_positives,
            report.false_negatives,
            report.id_switches,
            report.fragmentations,
        )

    ok = mota_ok and swap_ok and invariant
    verdict(
        capsys,
        ok,
        6,
        f"metrics MOTA fixture={mota_report.mota:.3f} (target 0.8), crossed "
        f"IDSW={swap_report.id_switches} (target 2), relabel invariance over "
        f"100 permutations {'holds' if invariant else 'BROKEN'}",
    )
    assert mota_ok and swap_ok and invariant


# ---------------------------------------------------------------------------
# 7. Same inputs, same bytes
# ---------------------------------------------------------------------------


def test_criterion_7_end_to_end_determinism(capsys, tmp_path):
    """Two CLI runs on a corrupted sequence produce byte-identical
    trajectories and manifests that differ only in timing fields."""
    seq_dir = tmp_path / "seq"
    assert (
        cli_main(
            [
                "simulate",
                "--output",
                str(seq_dir),
                "--objects",
                "5",
                "--frames",
                "60",
                "--noise-sigma",
                "2.0",
                "--false-negative-rate",
                "0.1",
                "--clutter-rate",
                "0.5",
            ]
        )
        == 0
    )
    outputs = []
    for name in ("a", "b"):
        out = tmp_path / f"{name}.txt"
        manifest = tmp_path / f"{name}.manifest.json"
        code = cli_main(
            [
                "track",
                "--det",
                str(seq_dir / "det" / "det.txt"),
                "--seq-info",
                str(seq_dir / "seqinfo.ini"),
                "--out",
                str(out),
                "--manifest",
                str(manifest),
            ]
        )
        assert code == 0
        data = json.loads(manifest.read_text())
        data.pop("timings")
        data.pop("output")
        data["report"].pop("wall_time")
        data["report"].pop("fps")
        outputs.append((out.read_bytes(), data))
    bytes_ok = outputs[0][0] == outputs[1][0]
    manifest_ok = outputs[0][1] == outputs[1][1]
    ok = bytes_ok and manifest_ok
    verdict(
        capsys,
        ok,
        7,
        f"determinism trajectories byte-identical={bytes_ok}, manifests equal "
        f"modulo timings={manifest_ok}",
    )
    assert bytes_ok and manifest_ok


# ---------------------------------------------------------------------------
# 8. Throughput floor
# ---------------------------------------------------------------------------


def test_criterion_8_throughput(capsys):
    """20 objects over 600 frames with the default configuration must
    sustain >= 15 fps (hard floor; 30 fps is the soft target)."""
    spec = linear_scenario(
        n_objects=20, frame_count=600, image_width=1920, image_height=1080
    )
    data = generate_scenario(spec)
    _, report = track_sequence(data.detections, data.info, TrackingConfig())
    ok = report.fps >= 15.0
    verdict(
        capsys,
        ok,
        8,
        f"throughput {report.fps:.1f} fps on 20 objects x 600 frames "
        f"({report.backend} backend; target 30, hard floor 15)",
    )
    assert report.fps >= 15.0


# ---------------------------------------------------------------------------
# 9. File formats round-trip within write precision
# ---------------------------------------------------------------------------


def test_criterion_9_format_round_trip(capsys, tmp_path):
    """1000 random records survive write/parse within 0.005 on every field,
    and the bundled benchmark-layout fixtures parse."""
    rng = np.random.Generator(np.random.PCG64(7))
    flat = rng.choice(500 * 50, size=1000, replace=False)
    records = []
    for key in flat:
        records.append(
            TrajectoryRecord(
                frame=int(key) // 50 + 1,
                identity=int(key) % 50 + 1,
                class_id=int(rng.integers(1, 4)),
                box=BoundingBox(
                    left=float(rng.uniform(-50.0, 1850.0)),
                    top=float(rng.uniform(-50.0, 950.0)),
                    width=float(rng.uniform(5.0, 300.0)),
                    height=float(rng.uniform(5.0, 300.0)),
                ),
                score=float(rng.uniform(0.0, 1.0)),
            )
        )
    out = tmp_path / "round_trip.txt"
    write_trajectories(records, out)
    parsed = {(r.frame, r.identity): r for r in parse_trajectories(out)}
    worst = 0.0
    classes_ok = len(parsed) == len(records)
    for rec in records:
        got = parsed[(rec.frame, rec.identity)]
        classes_ok &= got.class_id == rec.class_id
        worst = max(
            worst,
            abs(got.box.left - rec.box.left),
            abs(got.box.top - rec.box.top),
            abs(got.box.width - rec.box.width),
            abs(got.box.height - rec.box.height),
            abs(got.score - rec.score),
        )
    round_trip_ok = worst <= 0.005 + 1e-9 and classes_ok

    seq_dir = DATA_DIR / "TINY-01"
    dets = parse_detections(seq_dir / "det" / "det.txt")
    gt = parse_ground_truth(seq_dir / "gt" / "gt.txt")
    info = load_sequence_info(seq_dir / "seqinfo.ini")
    fixtures_ok = len(dets) == 6 and len(gt) == 6 and info.frame_count == 3

    ok = round_trip_ok and fixtures_ok
    verdict(
        capsys,
        ok,
        9,
        f"round trip worst-field error {worst:.5f} over 1000 records "
        f"(cap 0.005), benchmark fixtures parse={fixtures_ok}",
    )
    assert round_trip_ok and fixtures_ok
