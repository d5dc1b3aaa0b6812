"""
Ground-truth pose files.

KITTI: 12 floats per line, the row-major 3x4 camera-to-world matrix [R|t].
TartanAir: 7 floats per line, ``tx ty tz qx qy qz qw`` (camera-to-world,
scalar-last quaternion). Rotations further than ``POSE_REJECT_TOL`` from
orthonormal are rejected; beyond ``POSE_SILENT_TOL`` they are projected back
onto SO(3) with a warning.
"""

from __future__ import annotations

from pathlib import Path
from typing import Literal

import numpy as np

from epivo.core.errors import ConfigError, ParseError, PoseDataError
from epivo.core.logger import logger
from epivo.datasets.records import parse_floats, read_records, write_rows
from epivo.geometry.rotation import rotation_from_quaternion, rotation_to_quaternion
from epivo.geometry.types import Pose, Rotation
from epivo.pipeline.trajectory import Trajectory
from epivo.settings import tolerances

PoseFormat = Literal["kitti", "tartanair"]

POSE_COLUMNS: dict[str, int] = {"kitti": 12, "tartanair": 7}


def _checked_rotation(path: Path, line_number: int, matrix: np.ndarray) -> Rotation:
    det = np.linalg.det(matrix)
    if det <= 0:
        raise PoseDataError(f"{path}:{line_number}: rotation has determinant {det:.6g}")
    deviation = float(np.max(np.abs(matrix.T @ matrix - np.eye(3))))
    if deviation > tolerances.POSE_REJECT_TOL:
        raise PoseDataError(
            f"{path}:{line_number}: rotation is not orthonormal (max |RᵀR - I| = {deviation:.3e})"
        )
    if deviation > tolerances.POSE_SILENT_TOL:
        logger.warning(f"{path}:{line_number}: re-orthonormalized rotation ({deviation:.3e})")
    if deviation > tolerances.ORTHONORMAL_TOL or abs(det - 1.0) > tolerances.DET_TOL:
        return Rotation.nearest(matrix)
    return Rotation(matrix)


def _kitti_pose(path: Path, line_number: int, values: np.ndarray) -> Pose:
    matrix = values.reshape(3, 4)
    return Pose(_checked_rotation(path, line_number, matrix[:, :3]), matrix[:, 3])


def _tartanair_pose(path: Path, line_number: int, values: np.ndarray) -> Pose:
    quaternion = values[3:]
    norm = float(np.linalg.norm(quaternion))
    if abs(norm - 1.0) > tolerances.POSE_REJECT_TOL:
        raise PoseDataError(f"{path}:{line_number}: quaternion norm {norm:.6g} is not 1")
    if abs(norm - 1.0) > tolerances.POSE_SILENT_TOL:
        logger.warning(f"{path}:{line_number}: renormalized quaternion (norm {norm:.9g})")
    return Pose(rotation_from_quaternion(quaternion / norm), values[:3])


def _columns(fmt: str) -> int:
    if fmt not in POSE_COLUMNS:
        raise ConfigError(f"Unknown pose format '{fmt}', expected one of {tuple(POSE_COLUMNS)}")
    return POSE_COLUMNS[fmt]


def load_poses(path: Path, fmt: PoseFormat = "kitti") -> Trajectory:
    """
    Read a camera-to-world trajectory

    Args:
        path: Pose file
        fmt: ``kitti`` (12 columns) or ``tartanair`` (7 columns)

    Returns:
        Trajectory with one pose per non-comment line

    Raises:
        ParseError: On a malformed line (carries the line number)
        PoseDataError: On a rotation beyond the dataset tolerance
    """
    columns = _columns(fmt)
    parse = _kitti_pose if fmt == "kitti" else _tartanair_pose
    records = read_records(path)
    if not records:
        raise ParseError(path, 1, "no poses")
    poses = [
        parse(path, r.line_number, parse_floats(path, r, columns)) for r in records
    ]
    logger.debug(f"Loaded {len(poses)} {fmt} pose(s) from {path}")
    return Trajectory(poses)


def write_poses(path: Path, trajectory: Trajectory, fmt: PoseFormat = "kitti") -> Path:
    """Write camera-to-world poses with 17 significant digits."""
    _columns(fmt)
    if fmt == "kitti":
        rows = [pose.matrix()[:3].reshape(-1) for pose in trajectory.poses]
    else:
        rows = [
            np.concatenate([pose.t, rotation_to_quaternion(pose.rotation)])
            for pose in trajectory.poses
        ]
    return write_rows(path, rows)
