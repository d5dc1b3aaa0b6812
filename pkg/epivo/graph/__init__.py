"""Correspondence graph construction and node scoring."""

from epivo.graph.builder import (
    CorrespondenceGraph,
    EdgeTag,
    LiftResult,
    Point3D,
    build_graph,
    knn_edges,
    lift,
    lift_with_indices,
    mst_edges,
)
from epivo.graph.scoring import (
    MessagePassingScorer,
    fit_message_passing_scorer,
    node_features,
    residual_weights,
    score_nodes,
)

__all__ = [
    "CorrespondenceGraph",
    "EdgeTag",
    "LiftResult",
    "MessagePassingScorer",
    "Point3D",
    "build_graph",
    "fit_message_passing_scorer",
    "knn_edges",
    "lift",
    "lift_with_indices",
    "mst_edges",
    "node_features",
    "residual_weights",
    "score_nodes",
]
