"""
Node scoring for weighted pose estimation.

``residual`` mode weighs each node by exp(−d/σ̂) of its Sampson residual under
an initial essential matrix. ``message_passing`` mode aggregates residual
features over graph neighbors for two rounds and applies a logistic head.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Literal, Optional, Sequence

import numpy as np
from scipy.special import expit
from sklearn.linear_model import LogisticRegression

from epivo.core.errors import DataError
from epivo.core.logger import logger
from epivo.geometry.epipolar import MatrixLike, SampsonBatch, sampson_residuals
from epivo.geometry.types import CameraModel
from epivo.graph.builder import CorrespondenceGraph
from epivo.settings import graph_defaults

ScoringMode = Literal["residual", "message_passing"]

FEATURE_NAMES = ("residual", "neighbor_1", "neighbor_2", "degree", "x", "y", "z")


def _residual_scale(values: np.ndarray) -> float:
    return max(float(np.median(values)), graph_defaults.RESIDUAL_SCALE_FLOOR)


def residual_weights(residuals: SampsonBatch) -> np.ndarray:
    """w = exp(−d/σ̂), σ̂ the median residual of non-degenerate nodes.

    Degenerate nodes get weight 0; if every node is degenerate the weights
    are uniform.
    """
    n = len(residuals.values)
    if n == 1:
        return np.ones(1)
    valid = ~residuals.degenerate
    if not np.any(valid):
        logger.warning("All Sampson residuals are degenerate; using uniform node weights")
        return np.ones(n)
    scale = _residual_scale(residuals.values[valid])
    return np.where(valid, np.exp(-residuals.values / scale), 0.0)


def node_residuals(graph: CorrespondenceGraph, e_init: MatrixLike) -> SampsonBatch:
    x1, x2 = graph.normalized_points()
    return sampson_residuals(e_init, x1, x2)


def node_features(graph: CorrespondenceGraph, residuals: SampsonBatch) -> np.ndarray:
    """Columns follow ``FEATURE_NAMES``.

    Log-residual, two rounds of neighbor means, degree and centered coordinates.
    """
    valid = ~residuals.degenerate
    scale = _residual_scale(residuals.values[valid]) if np.any(valid) else 1.0
    r = np.log1p(residuals.values / scale)
    neighbors = graph.neighbors()

    def aggregate(values: np.ndarray) -> np.ndarray:
        return np.array(
            [values[nb].mean() if len(nb) else values[i] for i, nb in enumerate(neighbors)]
        )

    rounds = [r]
    for _ in range(graph_defaults.MESSAGE_ROUNDS):
        rounds.append(aggregate(rounds[-1]))

    degrees = graph.degrees()
    degrees = degrees / max(degrees.max(), 1.0)
    centered = graph.points - graph.points.mean(axis=0)
    spread = centered.std(axis=0)
    coords = centered / np.where(spread > 0, spread, 1.0)
    return np.column_stack(rounds + [degrees, coords])


@dataclass(frozen=True, eq=False)
class MessagePassingScorer:
    """Logistic head over ``node_features``; the defaults penalize large residuals."""

    coefficients: np.ndarray = field(
        default_factory=lambda: np.array([-4.0, -1.0, -0.5, 0.0, 0.0, 0.0, 0.0])
    )
    bias: float = 4.0

    def __post_init__(self) -> None:
        coefficients = np.asarray(self.coefficients, dtype=np.float64).reshape(-1)
        if len(coefficients) != len(FEATURE_NAMES):
            raise DataError(
                f"Scorer needs {len(FEATURE_NAMES)} coefficients, got {len(coefficients)}"
            )
        object.__setattr__(self, "coefficients", coefficients)

    def score(self, features: np.ndarray) -> np.ndarray:
        return expit(features @ self.coefficients + self.bias)


def score_nodes(
    graph: CorrespondenceGraph,
    e_init: MatrixLike,
    cam: Optional[CameraModel] = None,
    mode: ScoringMode = "residual",
    scorer: Optional[MessagePassingScorer] = None,
) -> np.ndarray:
    """Per-node weights in [0, 1] (``cam`` defaults to the graph's camera)."""
    if cam is not None and cam != graph.cam:
        graph = replace(graph, cam=cam)
    residuals = node_residuals(graph, e_init)
    if mode == "residual":
        return residual_weights(residuals)
    if mode != "message_passing":
        raise DataError(f"Unknown scoring mode '{mode}'")
    if graph.n == 1:
        return np.ones(1)
    if np.all(residuals.degenerate):
        logger.warning("All Sampson residuals are degenerate; using uniform node weights")
        return np.ones(graph.n)
    weights = (scorer or MessagePassingScorer()).score(node_features(graph, residuals))
    return np.clip(weights, 0.0, 1.0)


def fit_message_passing_scorer(
    graphs: Sequence[CorrespondenceGraph],
    labels: Sequence[np.ndarray],
    essentials: Sequence[MatrixLike],
    *,
    regularization: float = 1.0,
) -> MessagePassingScorer:
    """Fit the logistic head on labeled graphs (label 1 = inlier)."""
    if not (len(graphs) == len(labels) == len(essentials)) or not graphs:
        raise DataError("Scorer fitting needs one label array and essential matrix per graph")
    features = np.concatenate(
        [node_features(g, node_residuals(g, e)) for g, e in zip(graphs, essentials)], axis=0
    )
    targets = np.concatenate([np.asarray(y, dtype=int).reshape(-1) for y in labels])
    if len(targets) != len(features):
        raise DataError(f"{len(targets)} labels for {len(features)} nodes")
    if len(np.unique(targets)) < 2:
        raise DataError("Scorer fitting needs both inlier and outlier labels")
    model = LogisticRegression(C=regularization, max_iter=1000)
    model.fit(features, targets)
    logger.info(f"Fitted message-passing scorer on {len(targets)} node(s)")
    return MessagePassingScorer(coefficients=model.coef_[0], bias=float(model.intercept_[0]))
