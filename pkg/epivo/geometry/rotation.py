"""SO(3) exponential/log maps and rotation angles."""

from __future__ import annotations

import numpy as np
from scipy.spatial.transform import Rotation as ScipyRotation

from epivo.geometry.types import Rotation


def rotation_exp(axis_angle) -> Rotation:
    """Axis-angle vector (radians) to rotation matrix."""
    vec = np.asarray(axis_angle, dtype=np.float64).reshape(3)
    return Rotation(ScipyRotation.from_rotvec(vec).as_matrix())


def rotation_log(rotation: Rotation) -> np.ndarray:
    """Rotation matrix to axis-angle vector with norm in [0, π]."""
    return ScipyRotation.from_matrix(rotation.matrix).as_rotvec()


def rotation_angle(rotation: Rotation) -> float:
    """Geodesic angle from identity, radians."""
    return float(np.linalg.norm(rotation_log(rotation)))


def relative_angle(a: Rotation, b: Rotation) -> float:
    """Geodesic distance between two rotations, radians (symmetric)."""
    return rotation_angle(Rotation.nearest(a.matrix.T @ b.matrix))


def rotation_from_quaternion(quaternion) -> Rotation:
    """Scalar-last quaternion (qx, qy, qz, qw) to rotation."""
    return Rotation(ScipyRotation.from_quat(np.asarray(quaternion, dtype=np.float64)).as_matrix())


def rotation_to_quaternion(rotation: Rotation) -> np.ndarray:
    return ScipyRotation.from_matrix(rotation.matrix).as_quat()
