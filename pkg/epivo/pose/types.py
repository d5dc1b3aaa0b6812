from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from epivo.core.errors import ConfigError
from epivo.geometry.types import EssentialMatrix
from epivo.settings import solver_defaults


class SolverTag(str, Enum):
    EIGHT_POINT = "eight_point"
    FIVE_POINT = "five_point"
    WEIGHTED_SVD = "weighted_svd"


@dataclass(frozen=True, eq=False)
class EssentialHypothesis:
    """A rank-2, unit-Frobenius essential matrix with its support score.

    ``sampson_score`` is the mean Sampson distance over the support set (the
    inliers for RANSAC, all matches otherwise).
    """

    e: EssentialMatrix
    sampson_score: float
    solver_tag: SolverTag
    weights_used: Optional[np.ndarray] = None
    inliers: Optional[np.ndarray] = None

    @property
    def matrix(self) -> np.ndarray:
        return self.e.matrix

    @property
    def inlier_count(self) -> int:
        return int(np.count_nonzero(self.inliers)) if self.inliers is not None else 0


@dataclass(frozen=True)
class RansacConfig:
    """Hypothesize-and-verify settings; ``inlier_threshold`` is in normalized Sampson units."""

    iterations: int = solver_defaults.RANSAC_ITERATIONS
    inlier_threshold: float = solver_defaults.RANSAC_THRESHOLD
    sample_size: int = 8
    seed: int = 0
    # stop as soon as one model explains every correspondence
    stop_at_goal: bool = True

    def __post_init__(self) -> None:
        if self.iterations < 1:
            raise ConfigError(f"RANSAC needs at least one iteration, got {self.iterations}")
        if not self.inlier_threshold > 0:
            raise ConfigError(f"RANSAC threshold must be positive, got {self.inlier_threshold}")
        if self.sample_size not in (5, 8):
            raise ConfigError(f"RANSAC sample size must be 5 or 8, got {self.sample_size}")
