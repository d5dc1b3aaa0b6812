"""Pair estimation, scale recovery, chaining, stage losses and evaluation metrics."""

from epivo.pipeline.estimator import (
    Frame,
    MatcherSettings,
    PairDiagnostics,
    PairEstimate,
    PairTask,
    PipelineConfig,
    SequenceResult,
    estimate_pair,
    estimate_sequence,
    pair_indices,
)
from epivo.pipeline.losses import LossWeights, StageInputs, StageLoss, stage_losses
from epivo.pipeline.metrics import (
    AbsoluteErrors,
    Alignment,
    RelativeErrors,
    absolute_metrics,
    relative_metrics,
    umeyama_alignment,
)
from epivo.pipeline.report import MetricsReport, build_report, write_manifest, write_report
from epivo.pipeline.scale import recover_scale
from epivo.pipeline.trajectory import Trajectory, chain

__all__ = [
    "AbsoluteErrors",
    "Alignment",
    "Frame",
    "LossWeights",
    "MatcherSettings",
    "MetricsReport",
    "PairDiagnostics",
    "PairEstimate",
    "PairTask",
    "PipelineConfig",
    "RelativeErrors",
    "SequenceResult",
    "StageInputs",
    "StageLoss",
    "Trajectory",
    "absolute_metrics",
    "build_report",
    "chain",
    "estimate_pair",
    "estimate_sequence",
    "pair_indices",
    "recover_scale",
    "relative_metrics",
    "stage_losses",
    "umeyama_alignment",
    "write_manifest",
    "write_report",
]
