"""Epipolar geometry core: types, essential/fundamental matrices, Sampson distance, SO(3) maps."""

from epivo.geometry.epipolar import (
    SampsonBatch,
    SampsonResult,
    algebraic_residuals,
    as_matrix,
    epipolar_lines,
    epipolar_lines_batch,
    essential_from_pose,
    fundamental_from_essential,
    fundamental_from_pose,
    homogeneous,
    line_distances,
    project_to_line,
    project_to_lines_batch,
    sampson_distance,
    sampson_residuals,
    skew,
)
from epivo.geometry.rotation import (
    relative_angle,
    rotation_angle,
    rotation_exp,
    rotation_from_quaternion,
    rotation_log,
    rotation_to_quaternion,
)
from epivo.geometry.types import (
    CameraModel,
    EpipolarLine,
    EssentialMatrix,
    FundamentalMatrix,
    PixelPoint,
    Pose,
    Rotation,
)

__all__ = [
    "CameraModel",
    "EpipolarLine",
    "EssentialMatrix",
    "FundamentalMatrix",
    "PixelPoint",
    "Pose",
    "Rotation",
    "SampsonBatch",
    "SampsonResult",
    "algebraic_residuals",
    "as_matrix",
    "epipolar_lines",
    "epipolar_lines_batch",
    "essential_from_pose",
    "fundamental_from_essential",
    "fundamental_from_pose",
    "homogeneous",
    "line_distances",
    "project_to_line",
    "project_to_lines_batch",
    "relative_angle",
    "rotation_angle",
    "rotation_exp",
    "rotation_from_quaternion",
    "rotation_log",
    "rotation_to_quaternion",
    "sampson_distance",
    "sampson_residuals",
    "skew",
]
