"""Closed-form denoisers: a known-target denoiser and the geometric oracle."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from epivo.core.errors import DataError
from epivo.core.logger import logger
from epivo.diffusion.process import DenoiserContext, KeypointState
from epivo.geometry.epipolar import fundamental_from_pose
from epivo.geometry.types import CameraModel, Pose
from epivo.simulation.pseudo_gt import project_pairs_to_lines


def noise_for_target(
    state: KeypointState, target: np.ndarray, context: DenoiserContext
) -> np.ndarray:
    """The ε that maps ``target`` to ``state`` under the forward formula."""
    alpha_bar = context.schedule.alpha_bar(state.t)
    if alpha_bar >= 1.0:
        return np.zeros_like(state.coords)
    return (state.coords - np.sqrt(alpha_bar) * target) / np.sqrt(1.0 - alpha_bar)


@dataclass(frozen=True, eq=False)
class TargetDenoiser:
    """Returns the exact noise for a known clean offset array."""

    target: np.ndarray
    offset_scale: float = 1.0

    def predict(self, state: KeypointState, context: DenoiserContext) -> np.ndarray:
        target = np.asarray(self.target, dtype=np.float64).reshape(-1, 4)
        if target.shape != state.coords.shape:
            raise DataError(
                f"Target shape {target.shape} does not match state {state.coords.shape}"
            )
        return noise_for_target(state, target, context)


@dataclass(frozen=True, eq=False)
class GeometricOracleDenoiser:
    """Ideal denoiser under a known pose.

    Its clean estimate is the epipolar-line projection of each anchor, so the
    reverse chain converges to the pseudo ground truth of the input matches.
    Epipole-degenerate anchors keep a zero offset.
    """

    true_pose: Pose
    cam: CameraModel
    offset_scale: float = 1.0
    _fundamental: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        fundamental = fundamental_from_pose(self.true_pose, self.cam).matrix
        object.__setattr__(self, "_fundamental", fundamental)

    def clean_offsets(self, context: DenoiserContext) -> np.ndarray:
        anchors = context.anchors
        x1, x2, degenerate = project_pairs_to_lines(
            self._fundamental, anchors[:, :2], anchors[:, 2:]
        )
        if np.any(degenerate):
            logger.debug(f"Oracle: {int(degenerate.sum())} degenerate anchor(s) passed through")
        return context.to_offsets(np.hstack([x1, x2]))

    def predict(self, state: KeypointState, context: DenoiserContext) -> np.ndarray:
        if len(context.anchors) != state.n:
            raise DataError(f"Context holds {len(context.anchors)} anchors for {state.n} states")
        return noise_for_target(state, self.clean_offsets(context), context)


def geometric_oracle_denoiser(
    true_pose: Pose, cam: CameraModel, offset_scale: float = 1.0
) -> GeometricOracleDenoiser:
    return GeometricOracleDenoiser(true_pose=true_pose, cam=cam, offset_scale=offset_scale)
