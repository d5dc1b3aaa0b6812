"""
Canned scenes, pairs and run configs shared by the test suites
"""

from pathlib import Path
from typing import Any, Optional

import numpy as np

from epivo.core.schemas import RunConfig, validate_run_config
from epivo.geometry.types import CameraModel, PixelPoint, Pose
from epivo.matching.types import Correspondence
from epivo.simulation.noise import NoiseConfig
from epivo.simulation.pseudo_gt import LabeledPair, make_labeled_pair
from epivo.simulation.scene import Scene, SceneConfig, generate_scene

SMALL_FRAMES = 6


def small_scene(seed: int = 0, n_frames: int = SMALL_FRAMES, points: int = 60) -> Scene:
    """A short forward-moving scene, quick enough for unit tests."""
    return generate_scene(SceneConfig(n_frames=n_frames, points_per_frame=points), seed)


def noisy_pair(sigma_p: float = 1.0, seed: int = 0) -> LabeledPair:
    """Frames 0 and 1 of ``small_scene`` with isotropic pixel noise."""
    return make_labeled_pair(small_scene(seed), 0, 1, NoiseConfig(sigma_p=sigma_p), seed)


def correspondences_from_points(
    points_cam: np.ndarray, pose: Pose, cam: CameraModel
) -> list[Correspondence]:
    """Exact matches of camera-a points under the point-transfer ``pose``."""
    x1 = cam.project(points_cam)
    x2 = cam.project(pose.apply(points_cam))
    return [
        Correspondence(PixelPoint.from_array(p), PixelPoint.from_array(q), 1.0, 0.0)
        for p, q in zip(x1, x2)
    ]


def random_points(
    rng: np.random.Generator, n: int, depth: tuple[float, float] = (4.0, 20.0)
) -> np.ndarray:
    """n points in front of an identity camera, inside a ±0.5 normalized field of view."""
    z = rng.uniform(*depth, n)
    xy = rng.uniform(-0.5, 0.5, (n, 2)) * z[:, None]
    return np.column_stack([xy, z])


def small_run_config(
    dataset: Optional[Path] = None, output: Optional[Path] = None, **sections: Any
) -> RunConfig:
    """Run config for a ``small_scene`` fixture; ``sections`` replace whole config sections."""
    raw: dict[str, Any] = {
        "seed": 0,
        "scene": {"n_frames": SMALL_FRAMES, "points_per_frame": 60},
        "schedule": {"steps": 20},
        "ransac": {"iterations": 200, "inlier_threshold": 4e-5},
        "pipeline": {"refinement": False, "solver": "multi"},
        "training": {"epochs": 2, "batch_size": 64, "hidden": 16},
        "plots": {"enabled": False},
    }
    if dataset is not None:
        raw["dataset"] = {"path": str(dataset)}
    if output is not None:
        raw["output_dir"] = str(output)
    raw.update(sections)
    return validate_run_config(raw)
