"""
Essential-matrix decomposition and chirality voting.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from epivo.core.errors import DataError, NoValidPoseError
from epivo.core.logger import logger
from epivo.geometry.epipolar import essential_from_pose, sampson_residuals
from epivo.geometry.types import EssentialMatrix, Pose, Rotation

W = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])

TriangulationMethod = Literal["dlt", "midpoint"]


def decompose(e: EssentialMatrix) -> list[Pose]:
    """The four (R, t) pairs {UWVᵀ, UWᵀVᵀ} × {+u₃, −u₃}; t is unit norm."""
    u, _, vt = np.linalg.svd(e.matrix)
    if np.linalg.det(u) < 0:
        u = -u
    if np.linalg.det(vt) < 0:
        vt = -vt
    t = u[:, 2] / np.linalg.norm(u[:, 2])
    candidates = []
    for rot in (u @ W @ vt, u @ W.T @ vt):
        rotation = Rotation.nearest(rot)
        for sign in (1.0, -1.0):
            candidates.append(Pose(rotation, sign * t, scale_free=True))
    return candidates


def triangulate_dlt(pose: Pose, x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
    """Homogeneous points (N, 4) for cameras [I|0] and [R|t] on normalized coordinates."""
    p1 = np.hstack([np.eye(3), np.zeros((3, 1))])
    p2 = pose.matrix()[:3]
    a = np.stack(
        [
            x1[:, 0:1] * p1[2] - p1[0],
            x1[:, 1:2] * p1[2] - p1[1],
            x2[:, 0:1] * p2[2] - p2[0],
            x2[:, 1:2] * p2[2] - p2[1],
        ],
        axis=1,
    )
    _, _, vt = np.linalg.svd(a)
    return vt[:, -1, :]


def triangulate_midpoint(pose: Pose, x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
    """Midpoint of the closest points of the two viewing rays, as homogeneous (N, 4) rows."""
    n = len(x1)
    d1 = np.column_stack([x1, np.ones(n)])
    # second ray in camera-1 coordinates: centre −Rᵀt, direction Rᵀ x̃₂
    c2 = -pose.R.T @ pose.t
    d2 = np.column_stack([x2, np.ones(n)]) @ pose.R
    b = np.einsum("ni,ni->n", d1, d2)
    a11 = np.einsum("ni,ni->n", d1, d1)
    a22 = np.einsum("ni,ni->n", d2, d2)
    rhs1 = d1 @ c2
    rhs2 = d2 @ c2
    det = a11 * a22 - b * b
    parallel = np.abs(det) <= 1e-15 * a11 * a22
    safe = np.where(parallel, 1.0, det)
    s = (rhs1 * a22 - b * rhs2) / safe
    u = (b * rhs1 - a11 * rhs2) / safe
    mid = 0.5 * (s[:, None] * d1 + (c2[None, :] + u[:, None] * d2))
    points = np.column_stack([mid, np.ones(n)])
    # parallel rays meet at infinity along the first ray
    points[parallel] = np.column_stack([d1[parallel], np.zeros(int(parallel.sum()))])
    return points


def chirality_votes(
    pose: Pose, x1: np.ndarray, x2: np.ndarray, method: TriangulationMethod = "dlt"
) -> np.ndarray:
    """Mask of correspondences triangulating in front of both cameras."""
    triangulate = triangulate_dlt if method == "dlt" else triangulate_midpoint
    points = triangulate(pose, x1, x2)
    w = points[:, 3]
    depth1 = points[:, 2] * w
    depth2 = (points[:, :3] @ pose.R.T + np.outer(w, pose.t))[:, 2] * w
    return (depth1 > 0) & (depth2 > 0)


@dataclass(frozen=True)
class ChiralityOutcome:
    index: int
    votes: tuple[int, ...]
    sampson: tuple[float, ...]


def rank_candidates(
    candidates: Sequence[Pose],
    x1: np.ndarray,
    x2: np.ndarray,
    method: TriangulationMethod = "dlt",
) -> ChiralityOutcome:
    """Most positive-depth votes wins; ties go to lower mean Sampson, then lower index."""
    x1 = np.asarray(x1, dtype=np.float64).reshape(-1, 2)
    x2 = np.asarray(x2, dtype=np.float64).reshape(-1, 2)
    if len(x1) < 1 or len(x1) != len(x2):
        raise DataError("Chirality needs at least one correspondence and equal-length point sets")
    if not candidates:
        raise NoValidPoseError("No pose candidates to select from")

    votes = [int(chirality_votes(pose, x1, x2, method).sum()) for pose in candidates]
    sampson = [sampson_residuals(essential_from_pose(pose), x1, x2).mean() for pose in candidates]
    if max(votes) == 0:
        raise NoValidPoseError("No candidate places any point in front of both cameras")
    best = min(range(len(candidates)), key=lambda k: (-votes[k], sampson[k], k))
    logger.debug(f"Chirality votes {votes}; selected candidate {best}")
    return ChiralityOutcome(index=best, votes=tuple(votes), sampson=tuple(sampson))


def chirality_select(
    candidates: Sequence[Pose],
    x1: np.ndarray,
    x2: np.ndarray,
    method: TriangulationMethod = "dlt",
) -> Pose:
    return candidates[rank_candidates(candidates, x1, x2, method).index]
