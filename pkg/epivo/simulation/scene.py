"""
Synthetic stereo scenes: a camera trajectory, 3D points visible in consecutive
frames, per-point descriptors, and exact stereo depth.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np

from epivo.core.errors import SceneGenerationError
from epivo.core.logger import logger
from epivo.geometry.rotation import rotation_exp
from epivo.geometry.types import CameraModel, Pose, Rotation
from epivo.settings import tolerances

SeedLike = Union[int, np.random.SeedSequence]

MIN_SHARED_POINTS = 8


def default_camera() -> CameraModel:
    return CameraModel(fx=500.0, fy=500.0, cx=320.0, cy=240.0, baseline=0.5, width=640, height=480)


@dataclass(frozen=True)
class SceneConfig:
    """Trajectory and point-sampling parameters.

    ``step`` is the per-frame translation in the current camera frame (z forward,
    x right, y down). Yaw increments are drawn uniformly in ±``yaw_step_max``.
    """

    n_frames: int = 10
    points_per_frame: int = 120
    depth_min: float = 4.0
    depth_max: float = 40.0
    step: tuple[float, float, float] = (0.0, 0.0, 1.0)
    yaw_step_max: float = 0.02
    translation_jitter: float = 0.05
    rotation_jitter: float = 0.005
    image_margin: float = 10.0
    descriptor_dim: int = 128
    descriptor_noise_max: float = 0.1
    camera: CameraModel = field(default_factory=default_camera)
    max_attempts: int = 20

    def __post_init__(self) -> None:
        if self.n_frames < 2:
            raise SceneGenerationError(f"A scene needs at least 2 frames, got {self.n_frames}")
        if self.points_per_frame < MIN_SHARED_POINTS:
            raise SceneGenerationError(
                f"Need at least {MIN_SHARED_POINTS} points per frame, got {self.points_per_frame}"
            )
        if not 0 < self.depth_min < self.depth_max:
            raise SceneGenerationError(
                f"Depth range must satisfy 0 < min < max, got [{self.depth_min}, {self.depth_max}]"
            )


@dataclass(frozen=True, eq=False)
class Scene:
    """World points, camera, and world-to-camera poses per frame."""

    points3d: np.ndarray
    cam: CameraModel
    trajectory: list[Pose]
    rng_seed: int
    descriptors: np.ndarray

    @property
    def n_frames(self) -> int:
        return len(self.trajectory)

    def camera_to_world(self) -> list[Pose]:
        return [pose.inverse() for pose in self.trajectory]

    def points_in_camera(self, frame: int) -> np.ndarray:
        return self.trajectory[frame].apply(self.points3d)

    def visible(self, frame: int) -> np.ndarray:
        """Mask of points in front of the camera and inside the image."""
        cam_points = self.points_in_camera(frame)
        in_front = cam_points[:, 2] > 0
        mask = np.zeros(len(cam_points), dtype=bool)
        if np.any(in_front):
            pixels = self.cam.project(cam_points[in_front])
            mask[in_front] = self.cam.in_image(pixels)
        return mask

    def relative_pose(self, a: int, b: int) -> Pose:
        """Point-transfer pose from camera a to camera b: X_b = R X_a + t."""
        return self.trajectory[b].compose(self.trajectory[a].inverse())

    def is_degenerate_pair(self, a: int, b: int) -> bool:
        return bool(np.linalg.norm(self.relative_pose(a, b).t) <= tolerances.DEGENERATE_EPS)


@dataclass(frozen=True, eq=False)
class StereoDepths:
    """Exact stereo observation of one frame."""

    point_indices: np.ndarray
    depths: np.ndarray
    disparities: np.ndarray
    left_pixels: np.ndarray
    right_pixels: np.ndarray


def _trajectory(config: SceneConfig, rng: np.random.Generator) -> list[Pose]:
    step = np.asarray(config.step, dtype=np.float64)
    rotation = Rotation.identity()
    position = np.zeros(3)
    camera_to_world = [Pose(rotation, position)]
    for _ in range(1, config.n_frames):
        yaw = rng.uniform(-config.yaw_step_max, config.yaw_step_max)
        jitter_rot = rng.uniform(-1.0, 1.0, 3) * config.rotation_jitter
        jitter_t = rng.uniform(-1.0, 1.0, 3) * config.translation_jitter
        position = position + rotation.matrix @ (step + jitter_t)
        rotation = rotation @ rotation_exp([0.0, yaw, 0.0]) @ rotation_exp(jitter_rot)
        camera_to_world.append(Pose(rotation, position))
    return [pose.inverse() for pose in camera_to_world]


def _sample_frame_points(
    config: SceneConfig,
    trajectory: list[Pose],
    frame: int,
    rng: np.random.Generator,
) -> np.ndarray:
    cam = config.camera
    neighbor = frame + 1 if frame + 1 < len(trajectory) else frame - 1
    kept: list[np.ndarray] = []
    count = 0
    margin = config.image_margin
    for _ in range(config.max_attempts):
        n = config.points_per_frame
        u = rng.uniform(margin, cam.width - margin, n)
        v = rng.uniform(margin, cam.height - margin, n)
        z = rng.uniform(config.depth_min, config.depth_max, n)
        cam_points = np.column_stack([(u - cam.cx) / cam.fx * z, (v - cam.cy) / cam.fy * z, z])
        world = trajectory[frame].inverse().apply(cam_points)
        other = trajectory[neighbor].apply(world)
        ok = other[:, 2] > 0
        ok[ok] = cam.in_image(cam.project(other[ok]))
        kept.append(world[ok])
        count += int(ok.sum())
        if count >= config.points_per_frame:
            break
    points = np.concatenate(kept, axis=0)[: config.points_per_frame]
    if len(points) < MIN_SHARED_POINTS:
        raise SceneGenerationError(
            f"Frame {frame}: only {len(points)} point(s) visible in frames {frame} and {neighbor}"
        )
    return points


def generate_scene(config: SceneConfig, seed: int) -> Scene:
    """Deterministic scene for ``(config, seed)``."""
    rng = np.random.default_rng(seed)
    trajectory = _trajectory(config, rng)
    points = np.concatenate(
        [_sample_frame_points(config, trajectory, k, rng) for k in range(config.n_frames)], axis=0
    )
    descriptors = rng.normal(size=(len(points), config.descriptor_dim))
    descriptors /= np.linalg.norm(descriptors, axis=1, keepdims=True)
    scene = Scene(
        points3d=points,
        cam=config.camera,
        trajectory=trajectory,
        rng_seed=seed,
        descriptors=descriptors,
    )
    for k in range(config.n_frames - 1):
        if scene.is_degenerate_pair(k, k + 1):
            logger.warning(f"Frames {k} and {k + 1} share the same pose (zero baseline)")
    logger.debug(f"Generated scene: {len(points)} points, {config.n_frames} frames, seed {seed}")
    return scene


def shared_points(scene: Scene, a: int, b: int) -> np.ndarray:
    """Indices of points visible in both frames."""
    return np.nonzero(scene.visible(a) & scene.visible(b))[0]


def stereo_depths(scene: Scene, frame: int) -> StereoDepths:
    """Exact depth z and disparity fB/z for points in front of the left camera."""
    cam = scene.cam
    cam_points = scene.points_in_camera(frame)
    idx = np.nonzero(cam_points[:, 2] > 0)[0]
    excluded = len(cam_points) - len(idx)
    if excluded:
        logger.debug(f"Frame {frame}: {excluded} point(s) behind the camera excluded")
    pts = cam_points[idx]
    left = cam.project(pts)
    right = cam.project(pts - np.array([cam.baseline, 0.0, 0.0]))
    depths = pts[:, 2]
    return StereoDepths(
        point_indices=idx,
        depths=depths,
        disparities=cam.fx * cam.baseline / depths,
        left_pixels=left,
        right_pixels=right,
    )


def depth_from_disparity(disparity, cam: CameraModel):
    return cam.fx * cam.baseline / np.asarray(disparity, dtype=np.float64)


def disparity_from_depth(depth, cam: CameraModel):
    return cam.fx * cam.baseline / np.asarray(depth, dtype=np.float64)
