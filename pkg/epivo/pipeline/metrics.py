"""
Relative and absolute pose error metrics.

- RRE: geodesic angle of R_estᵀ R_gt (degrees).
- RTE: ‖t_est − t_gt‖; a scale-free estimate is first rescaled to ‖t_gt‖.
  The angle between the translation directions is reported alongside.
- ATE: RMS position error after the requested alignment of the estimate
  onto the ground truth (none, rigid SE(3), or similarity Sim(3)).
- APE: RMS position error with no alignment at all. Both trajectories are
  expected in a shared frame (chained estimates start at identity; anchor
  the ground truth with ``Trajectory.anchored``).
- APE-R: mean geodesic rotation error (degrees) under the same convention.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, NamedTuple

import numpy as np

from epivo.core.errors import ConfigError, DataError
from epivo.geometry.rotation import relative_angle
from epivo.geometry.types import Pose
from epivo.pipeline.trajectory import Trajectory
from epivo.settings import tolerances

AlignmentMode = Literal["none", "rigid", "similarity"]
ALIGNMENT_MODES: tuple[str, ...] = ("none", "rigid", "similarity")


class RelativeErrors(NamedTuple):
    rre: float
    rte: float
    rte_angle: float


def _direction_angle(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na <= tolerances.DEGENERATE_EPS or nb <= tolerances.DEGENERATE_EPS:
        return 0.0
    cos = np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0)
    return float(np.degrees(np.arccos(cos)))


def rotation_error(a: Pose, b: Pose) -> float:
    """Geodesic angle between the two rotations, degrees (exactly 0 for equal matrices)."""
    if np.array_equal(a.R, b.R):
        return 0.0
    return float(np.degrees(relative_angle(a.rotation, b.rotation)))


def relative_metrics(estimated: Pose, truth: Pose) -> RelativeErrors:
    rre = rotation_error(estimated, truth)
    t_est = estimated.t
    if estimated.scale_free:
        t_est = t_est * np.linalg.norm(truth.t)
    rte = float(np.linalg.norm(t_est - truth.t))
    return RelativeErrors(rre=rre, rte=rte, rte_angle=_direction_angle(estimated.t, truth.t))


@dataclass(frozen=True, eq=False)
class Alignment:
    """target ≈ scale · R · source + t"""

    rotation: np.ndarray
    translation: np.ndarray
    scale: float = 1.0

    def apply(self, points: np.ndarray) -> np.ndarray:
        return self.scale * points @ self.rotation.T + self.translation


def umeyama_alignment(
    source: np.ndarray, target: np.ndarray, with_scale: bool = False
) -> Alignment:
    """Closed-form least-squares alignment of two (N, 3) point sets."""
    source = np.asarray(source, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    mu_s, mu_t = source.mean(axis=0), target.mean(axis=0)
    s0, t0 = source - mu_s, target - mu_t
    covariance = t0.T @ s0 / len(source)
    u, d, vt = np.linalg.svd(covariance)
    sign = np.eye(3)
    if np.linalg.det(u) * np.linalg.det(vt) < 0:
        sign[2, 2] = -1.0
    rotation = u @ sign @ vt
    scale = 1.0
    if with_scale:
        variance = float(np.mean(np.sum(s0**2, axis=1)))
        if variance > tolerances.DEGENERATE_EPS:
            scale = float(np.trace(np.diag(d) @ sign) / variance)
    translation = mu_t - scale * rotation @ mu_s
    return Alignment(rotation=rotation, translation=translation, scale=scale)


def align_positions(
    estimated: np.ndarray, truth: np.ndarray, alignment: AlignmentMode
) -> np.ndarray:
    if alignment not in ALIGNMENT_MODES:
        raise ConfigError(f"Unknown alignment mode '{alignment}', expected {ALIGNMENT_MODES}")
    if alignment == "none" or np.array_equal(estimated, truth):
        return estimated
    fit = umeyama_alignment(estimated, truth, with_scale=alignment == "similarity")
    return fit.apply(estimated)


@dataclass(frozen=True)
class AbsoluteErrors:
    ate: float
    ape: float
    ape_r: float
    alignment: str
    per_frame_error: tuple[float, ...] = ()

    def cumulative_ate(self) -> np.ndarray:
        """RMS of the aligned position error over frames 0..k."""
        squared = np.asarray(self.per_frame_error) ** 2
        return np.sqrt(np.cumsum(squared) / np.arange(1, len(squared) + 1))


def _check_lengths(estimated: Trajectory, truth: Trajectory) -> None:
    if len(estimated) != len(truth):
        raise DataError(f"Trajectory lengths differ: {len(estimated)} vs {len(truth)}")
    if len(estimated) < 2:
        raise DataError("Absolute metrics need at least 2 poses")


def absolute_metrics(
    estimated: Trajectory, truth: Trajectory, alignment: AlignmentMode = "rigid"
) -> AbsoluteErrors:
    _check_lengths(estimated, truth)
    est_positions, gt_positions = estimated.positions(), truth.positions()
    aligned = align_positions(est_positions, gt_positions, alignment)
    errors = np.linalg.norm(aligned - gt_positions, axis=1)
    raw = np.linalg.norm(est_positions - gt_positions, axis=1)
    angles = [rotation_error(e, g) for e, g in zip(estimated.poses, truth.poses)]
    return AbsoluteErrors(
        ate=float(np.sqrt(np.mean(errors**2))),
        ape=float(np.sqrt(np.mean(raw**2))),
        ape_r=float(np.mean(angles)),
        alignment=alignment,
        per_frame_error=tuple(float(e) for e in errors),
    )
