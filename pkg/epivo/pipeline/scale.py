"""Metric scale for unit-norm translations from stereo depth."""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from epivo.core.errors import DataError, ScaleRecoveryError
from epivo.core.logger import logger
from epivo.geometry.types import CameraModel, Pose
from epivo.matching.types import Correspondence, correspondence_arrays
from epivo.pose.decomposition import triangulate_dlt

# homogeneous w below this is a point at infinity
_FINITE_W = 1e-12


def depth_ratios(
    pose: Pose,
    correspondences: Sequence[Correspondence],
    depths: Sequence[float] | np.ndarray,
    cam: CameraModel,
) -> np.ndarray:
    """stereo depth / triangulated depth for every usable correspondence."""
    depths = np.asarray(depths, dtype=np.float64).reshape(-1)
    if len(depths) != len(correspondences):
        raise DataError(f"{len(correspondences)} correspondences but {len(depths)} depths")
    valid = np.isfinite(depths) & (depths > 0)
    if not np.any(valid):
        raise ScaleRecoveryError("No valid stereo depth for scale recovery")

    x1, x2 = correspondence_arrays(correspondences)
    points = triangulate_dlt(pose, cam.normalize(x1), cam.normalize(x2))
    w = points[:, 3]
    finite = np.abs(w) > _FINITE_W
    triangulated = np.where(finite, points[:, 2] / np.where(finite, w, 1.0), 0.0)
    usable = valid & finite & (triangulated > 0)
    if not np.any(usable):
        raise ScaleRecoveryError("No correspondence triangulates with positive depth")
    return depths[usable] / triangulated[usable]


def recover_scale(
    pose: Pose,
    correspondences: Sequence[Correspondence],
    depths: Optional[Sequence[float] | np.ndarray],
    cam: CameraModel,
) -> Pose:
    """Scale t by median(stereo depth / triangulated depth).

    With ``depths`` None (monocular) the unit-norm pose is returned unchanged
    and keeps its ``scale_free`` flag.
    """
    if depths is None:
        return pose
    if np.linalg.norm(pose.t) <= 0:
        raise ScaleRecoveryError("Cannot scale a zero translation")
    unit = pose.unit()
    ratios = depth_ratios(unit, correspondences, depths, cam)
    scale = float(np.median(ratios))
    if not (np.isfinite(scale) and scale > 0):
        raise ScaleRecoveryError(f"Recovered scale is not positive: {scale}")
    logger.debug(f"Scale from {len(ratios)} depth ratio(s): {scale:.6g}")
    return unit.with_translation(unit.t * scale, scale_free=False)
