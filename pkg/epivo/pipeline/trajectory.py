"""
Absolute camera trajectories and relative-pose chaining.

Trajectory poses are camera-to-world. ``chain`` takes camera motions
(camera-to-world increments); the point-transfer pose returned by pair
estimation is the inverse of a camera motion.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from epivo.core.errors import DataError
from epivo.geometry.types import Pose


@dataclass(frozen=True, eq=False)
class Trajectory:
    poses: list[Pose]
    timestamps: Optional[tuple[float, ...]] = None

    def __post_init__(self) -> None:
        if not self.poses:
            raise DataError("A trajectory needs at least one pose")
        if self.timestamps is not None and len(self.timestamps) != len(self.poses):
            raise DataError(f"{len(self.poses)} poses but {len(self.timestamps)} timestamps")

    def __len__(self) -> int:
        return len(self.poses)

    def positions(self) -> np.ndarray:
        return np.array([p.t for p in self.poses])

    def rotations(self) -> np.ndarray:
        return np.array([p.R for p in self.poses])

    def anchored(self) -> "Trajectory":
        """Re-expressed in the first camera's frame, so the first pose is identity."""
        base = self.poses[0].inverse()
        return Trajectory([base.compose(p) for p in self.poses], self.timestamps)

    def transformed(self, transform: Pose) -> "Trajectory":
        """Global rigid change of world frame, applied on the left."""
        return Trajectory([transform.compose(p) for p in self.poses], self.timestamps)

    def relatives(self) -> list[Pose]:
        """Camera motions between consecutive poses; ``chain`` inverts this."""
        return [a.inverse().compose(b) for a, b in zip(self.poses, self.poses[1:])]

    @classmethod
    def from_world_to_camera(cls, poses: Sequence[Pose]) -> "Trajectory":
        return cls([p.inverse() for p in poses])


def chain(relatives: Sequence[Pose], anchor: Optional[Pose] = None) -> Trajectory:
    """T_abs(k) = T_abs(k−1) · T_rel(k), starting from ``anchor`` (identity by default)."""
    current = anchor if anchor is not None else Pose.identity()
    poses = [current]
    for relative in relatives:
        current = current.compose(relative)
        poses.append(current)
    return Trajectory(poses)
