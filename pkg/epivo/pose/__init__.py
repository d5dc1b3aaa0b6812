"""Essential-matrix solvers, decomposition and robust estimation."""

from epivo.pose.decomposition import chirality_select, decompose, rank_candidates, triangulate_dlt
from epivo.pose.five_point import five_point
from epivo.pose.hypotheses import HypothesisSet, multi_hypothesis
from epivo.pose.robust import ransac_estimate
from epivo.pose.solvers import (
    DesignMatrix,
    WeightedSolution,
    eight_point,
    pixel_fundamental,
    weighted_svd_solve,
)
from epivo.pose.types import EssentialHypothesis, RansacConfig, SolverTag

__all__ = [
    "DesignMatrix",
    "EssentialHypothesis",
    "HypothesisSet",
    "RansacConfig",
    "SolverTag",
    "WeightedSolution",
    "chirality_select",
    "decompose",
    "eight_point",
    "five_point",
    "multi_hypothesis",
    "pixel_fundamental",
    "rank_candidates",
    "ransac_estimate",
    "triangulate_dlt",
    "weighted_svd_solve",
]
