"""Multi-class multi-object tracking by per-frame MCMC refinement.

The pipeline matches detections to tracks, resolves births and deaths so
the state dimension stays fixed, refines all live boxes with a data-driven
Metropolis-Hastings chain, and validates finished segments by change-point
scoring plus backward re-tracking.  Includes a synthetic sequence
generator and a CLEAR-MOT evaluator.
"""

from .backend import available_backends
from .clearmot import EvalConfig, MetricReport, compute_metrics
from .cpd import (
    ChangePointSeries,
    ChangeScoreStream,
    CpdConfig,
    LikelihoodSeries,
    change_point_scores,
    detect_change_points,
)
from .errors import ConfigError, ContractViolation
from .mot_io import (
    BoundingBox,
    Detection,
    SequenceInfo,
    TrajectoryRecord,
    iou,
    load_sequence_info,
    parse_detections,
    parse_ground_truth,
    parse_trajectories,
    write_ground_truth,
    write_trajectories,
)
from .motion import EntryModel, MotionModel, estimate_entity_transitions
from .observation import (
    DetectorWeightSet,
    FusedLikelihood,
    ObjectState,
    ObservationParams,
    fuse_likelihoods,
)
from .pipeline import RunReport, Tracker, TrackingConfig, track_sequence
from .sampler import ChainConfig, SceneParticle, run_chain
from .simulate import (
    DriftInjection,
    ObjectSpec,
    OcclusionWindow,
    ScenarioSpec,
    generate_scenario,
    linear_scenario,
    write_scenario,
)
from .validation import FbVerdict, TrackSegment, reverse_track, validate_segment

__version__ = "0.1.0"

__all__ = [
    "BoundingBox",
    "ChainConfig",
    "ChangePointSeries",
    "ChangeScoreStream",
    "ConfigError",
    "ContractViolation",
    "CpdConfig",
    "Detection",
    "DetectorWeightSet",
    "DriftInjection",
    "EntryModel",
    "EvalConfig",
    "FbVerdict",
    "FusedLikelihood",
    "LikelihoodSeries",
    "MetricReport",
    "MotionModel",
    "ObjectSpec",
    "ObjectState",
    "ObservationParams",
    "OcclusionWindow",
    "RunReport",
    "ScenarioSpec",
    "SceneParticle",
    "SequenceInfo",
    "TrackSegment",
    "Tracker",
    "TrackingConfig",
    "TrajectoryRecord",
    "available_backends",
    "change_point_scores",
    "compute_metrics",
    "detect_change_points",
    "estimate_entity_transitions",
    "fuse_likelihoods",
    "generate_scenario",
    "iou",
    "linear_scenario",
    "load_sequence_info",
    "parse_detections",
    "parse_ground_truth",
    "parse_trajectories",
    "reverse_track",
    "run_chain",
    "track_sequence",
    "validate_segment",
    "write_ground_truth",
    "write_scenario",
    "write_trajectories",
    "__version__",
]
