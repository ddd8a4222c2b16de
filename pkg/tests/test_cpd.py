"""Two-stage change-point scoring: streaming parity, detection, masking."""

from __future__ import annotations

import numpy as np
import pytest

from motrack import CpdConfig, change_point_scores, detect_change_points
from motrack.cpd import (
    ChangePointSeries,
    ChangeScoreStream,
    LikelihoodSeries,
    smooth_series,
)


def series(values, segment_id=1, start=1) -> LikelihoodSeries:
    frames = tuple(range(start, start + len(values)))
    return LikelihoodSeries(segment_id, frames, tuple(values))


# ---------------------------------------------------------------------------
# Streaming == batch
# ---------------------------------------------------------------------------


def test_online_equals_batch_bitwise():
    rng = np.random.Generator(np.random.PCG64(31))
    values = [float(v) for v in np.clip(rng.normal(0.8, 0.05, size=200), 1e-3, 1.0)]
    values[120:] = [float(v) for v in np.clip(rng.normal(0.2, 0.05, size=80), 1e-3, 1.0)]
    cfg = CpdConfig()
    stream = ChangeScoreStream(cfg)
    streamed = [stream.push(v) for v in values]
    batch = change_point_scores(series(values), cfg)
    assert tuple(s for s, _ in streamed) == batch.raw_outlier_scores
    assert tuple(c for _, c in streamed) == batch.change_scores


# ---------------------------------------------------------------------------
# Detection behaviour
# ---------------------------------------------------------------------------


def test_constant_series_stays_silent():
    out = change_point_scores(series([0.9] * 300), CpdConfig())
    assert out.detected_points == ()
    assert max(out.change_scores) < CpdConfig().threshold


def test_noiseless_collapse_detected_at_injection():
    values = [0.9] * 149 + [0.1] * 151  # collapse lands on frame 150
    out = change_point_scores(series(values), CpdConfig())
    assert len(out.detected_points) >= 1
    assert abs(out.detected_points[0] - 150) <= 5


def test_noisy_collapse_detected_within_tolerance():
    rng = np.random.Generator(np.random.PCG64(905))
    injection = int(rng.integers(80, 221))
    high = float(rng.uniform(0.75, 0.95))
    low = float(rng.uniform(0.05, 0.35))
    values = [
        float(np.clip((high if f < injection else low) + rng.normal(0.0, 0.05), 1e-3, 1.0))
        for f in range(300)
    ]
    out = change_point_scores(series(values), CpdConfig())
    assert len(out.detected_points) >= 1
    assert abs(out.detected_points[0] - (injection + 1)) <= 5


def test_upward_step_also_detected():
    values = [0.1] * 149 + [0.9] * 151
    out = change_point_scores(series(values), CpdConfig())
    # The scorer reacts to distribution breaks in either direction.
    assert len(out.detected_points) >= 1
    assert abs(out.detected_points[0] - 150) <= 5


def test_scores_bounded_and_warmup_masked():
    rng = np.random.Generator(np.random.PCG64(8))
    values = [float(v) for v in np.clip(rng.normal(0.7, 0.1, size=120), 1e-3, 1.0)]
    cfg = CpdConfig()
    out = change_point_scores(series(values), cfg)
    assert all(0.0 <= c <= 1.0 for c in out.change_scores)
    assert all(c == 0.0 for c in out.change_scores[: cfg.warmup])
    assert out.warmup == cfg.warmup
    assert len(out.raw_outlier_scores) == len(values)


def test_short_series_yields_nothing():
    out = change_point_scores(series([0.9, 0.8, 0.85] * 3), CpdConfig())
    assert out.detected_points == ()
    assert all(c == 0.0 for c in out.change_scores)


# ---------------------------------------------------------------------------
# Crossing rule
# ---------------------------------------------------------------------------


def crossing_series(scores, warmup=0) -> ChangePointSeries:
    n = len(scores)
    return ChangePointSeries(
        segment_id=1,
        frames=tuple(range(1, n + 1)),
        raw_outlier_scores=(0.0,) * n,
        change_scores=tuple(scores),
        warmup=warmup,
    )


def test_refractory_suppresses_second_crossing():
    scores = [0.0] * 30
    scores[5] = 0.9
    scores[8] = 0.9
    tight = crossing_series(scores)
    assert detect_change_points(tight, threshold=0.5, refractory=10) == (6,)
    assert detect_change_points(tight, threshold=0.5, refractory=2) == (6, 9)


def test_crossing_requires_observed_transition():
    # A series already above threshold at the first eligible index never
    # fires: detection demands an at-or-below to above transition.
    scores = [0.9, 0.9, 0.9, 0.1, 0.1]
    assert detect_change_points(crossing_series(scores), threshold=0.5) == ()


def test_warmup_shifts_first_eligible_index():
    scores = [0.0] * 10
    scores[3] = 0.9  # inside warm-up when warmup = 5
    early = crossing_series(scores, warmup=5)
    assert detect_change_points(early, threshold=0.5) == ()
    late = crossing_series(scores, warmup=1)
    assert detect_change_points(late, threshold=0.5) == (4,)


# ---------------------------------------------------------------------------
# Pieces
# ---------------------------------------------------------------------------


def test_smooth_series_trailing_average():
    assert smooth_series([0.0, 0.0, 3.0, 0.0, 0.0], window=3) == [0.0, 0.0, 1.0, 1.0, 1.0]
    assert smooth_series([2.0], window=5) == [2.0]
    with pytest.raises(ValueError):
        smooth_series([1.0], window=0)


def test_likelihood_series_validation():
    with pytest.raises(ValueError):
        LikelihoodSeries(1, (1, 2, 4), (0.5, 0.5, 0.5))
    with pytest.raises(ValueError):
        LikelihoodSeries(1, (1, 2), (0.5,))


def test_cpd_config_validation():
    with pytest.raises(ValueError):
        CpdConfig(order=0)
    with pytest.raises(ValueError):
        CpdConfig(discount=1.0)
    with pytest.raises(ValueError):
        CpdConfig(threshold=1.5)
    with pytest.raises(ValueError):
        CpdConfig(sigma_min=0.0)
