"""Shared helpers for the test suite."""

from __future__ import annotations

from pathlib import Path

import pytest

from motrack import BoundingBox, Detection, SequenceInfo, TrajectoryRecord

DATA_DIR = Path(__file__).parent / "data"


def box(cx: float, cy: float, width: float, height: float) -> BoundingBox:
    """Build a box from its center, the ergonomic form for hand fixtures."""
    return BoundingBox(cx - width / 2.0, cy - height / 2.0, width, height)


def det(
    frame: int,
    cx: float,
    cy: float,
    width: float = 40.0,
    height: float = 80.0,
    confidence: float = 1.0,
    class_id: int = 1,
) -> Detection:
    return Detection(
        frame=frame,
        box=box(cx, cy, width, height),
        confidence=confidence,
        class_id=class_id,
    )


def gt_record(
    frame: int,
    identity: int,
    cx: float,
    cy: float,
    width: float = 40.0,
    height: float = 80.0,
    class_id: int = 1,
    ignored: bool = False,
) -> TrajectoryRecord:
    return TrajectoryRecord(
        frame=frame,
        identity=identity,
        box=box(cx, cy, width, height),
        score=1.0,
        class_id=class_id,
        ignored=ignored,
    )


def pred_record(
    frame: int,
    identity: int,
    cx: float,
    cy: float,
    width: float = 40.0,
    height: float = 80.0,
    class_id: int = 1,
    score: float = 1.0,
) -> TrajectoryRecord:
    return TrajectoryRecord(
        frame=frame,
        identity=identity,
        box=box(cx, cy, width, height),
        score=score,
        class_id=class_id,
    )


@pytest.fixture
def seq_info() -> SequenceInfo:
    return SequenceInfo(
        name="unit",
        frame_count=300,
        image_width=1920,
        image_height=1080,
        frame_rate=30.0,
    )
