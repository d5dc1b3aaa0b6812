"""Pose files, per-pair input files, sequence directories and intermediate dumps."""

from epivo.datasets.dumps import load_graph, load_hypotheses, write_graph, write_hypotheses
from epivo.datasets.fixture import (
    Fixture,
    FixturePair,
    labeled_pairs,
    load_fixture,
    pair_file,
    verify_clean_pairs,
    write_fixture,
)
from epivo.datasets.pairs import (
    DisparityGrid,
    load_camera,
    load_correspondences,
    load_depths,
    load_descriptors,
    load_disparity_grid,
    load_points,
    write_camera,
    write_correspondences,
    write_depths,
    write_descriptors,
    write_disparity_grid,
    write_points,
)
from epivo.datasets.poses import load_poses, write_poses

__all__ = [
    "DisparityGrid",
    "Fixture",
    "FixturePair",
    "labeled_pairs",
    "load_camera",
    "load_correspondences",
    "load_depths",
    "load_descriptors",
    "load_disparity_grid",
    "load_fixture",
    "load_graph",
    "load_hypotheses",
    "load_points",
    "load_poses",
    "pair_file",
    "verify_clean_pairs",
    "write_camera",
    "write_correspondences",
    "write_depths",
    "write_descriptors",
    "write_disparity_grid",
    "write_fixture",
    "write_graph",
    "write_hypotheses",
    "write_points",
    "write_poses",
]
