"""
Sequence directory layout, shared by simulator output and real datasets.

    camera.json                      calibration
    poses.txt                        camera-to-world poses (KITTI or TartanAir rows)
    points.txt                       world points (simulated sequences only)
    manifest.json                    frame count, pair list, pose format, generator seed
    pairs/AAAAAA_BBBBBB.corr         matched correspondences
    pairs/AAAAAA_BBBBBB.clean.corr   noise-free correspondences (simulated only)
    pairs/AAAAAA_BBBBBB.depth        per-correspondence depth of the first view
    pairs/AAAAAA_BBBBBB.disp         per-correspondence disparity (optional)
    pairs/AAAAAA_BBBBBB.a.desc       descriptors of frame A (optional)
    pairs/AAAAAA_BBBBBB.b.desc       descriptors of frame B (optional)
    frames/AAAAAA.grid               dense disparity grid of frame A (optional)
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np

from epivo import __version__
from epivo.core.errors import DataError
from epivo.core.logger import logger
from epivo.datasets.pairs import (
    DisparityGrid,
    load_camera,
    load_correspondences,
    load_depths,
    load_descriptors,
    load_disparity_grid,
    write_camera,
    write_correspondences,
    write_depths,
    write_descriptors,
    write_points,
)
from epivo.datasets.poses import PoseFormat, load_poses, write_poses
from epivo.geometry.epipolar import fundamental_from_pose, sampson_residuals
from epivo.geometry.types import CameraModel, Pose
from epivo.matching.types import Correspondence, DescriptorSet, correspondence_arrays
from epivo.pipeline.trajectory import Trajectory
from epivo.settings import tolerances
from epivo.simulation.pseudo_gt import LabeledPair, PairObservation, pseudo_ground_truth
from epivo.simulation.scene import Scene

CLEAN_SAMPSON_TOL = 1e-10


def pair_stem(a: int, b: int) -> str:
    return f"{a:06d}_{b:06d}"


def pair_file(root: Path, a: int, b: int, suffix: str) -> Path:
    return Path(root) / "pairs" / f"{pair_stem(a, b)}{suffix}"


@dataclass(frozen=True, eq=False)
class FixturePair:
    frame_a: int
    frame_b: int
    correspondences: list[Correspondence]
    depths: Optional[np.ndarray] = None
    disparities: Optional[np.ndarray] = None
    clean: Optional[list[Correspondence]] = None
    descriptors_a: Optional[DescriptorSet] = None
    descriptors_b: Optional[DescriptorSet] = None


@dataclass(frozen=True, eq=False)
class Fixture:
    root: Path
    cam: CameraModel
    trajectory: Trajectory
    pairs: list[FixturePair]
    manifest: dict[str, Any]

    @property
    def n_frames(self) -> int:
        return len(self.trajectory)

    def true_relative(self, a: int, b: int) -> Pose:
        """Point-transfer pose a → b from the camera-to-world ground truth."""
        return self.trajectory.poses[b].inverse().compose(self.trajectory.poses[a])

    def frame_grid(self, index: int) -> Optional[DisparityGrid]:
        path = self.root / "frames" / f"{index:06d}.grid"
        return load_disparity_grid(path) if path.is_file() else None


def _optional(path: Path, loader):
    return loader(path) if path.is_file() else None


def _load_pair(root: Path, a: int, b: int) -> FixturePair:
    corr_path = pair_file(root, a, b, ".corr")
    if not corr_path.is_file():
        raise DataError(f"Missing correspondences for pair ({a}, {b}): {corr_path}")
    return FixturePair(
        frame_a=a,
        frame_b=b,
        correspondences=load_correspondences(corr_path),
        depths=_optional(pair_file(root, a, b, ".depth"), load_depths),
        disparities=_optional(pair_file(root, a, b, ".disp"), load_depths),
        clean=_optional(pair_file(root, a, b, ".clean.corr"), load_correspondences),
        descriptors_a=_optional(pair_file(root, a, b, ".a.desc"), load_descriptors),
        descriptors_b=_optional(pair_file(root, a, b, ".b.desc"), load_descriptors),
    )


def load_fixture(root: Path, pose_format: Optional[PoseFormat] = None) -> Fixture:
    """
    Load a sequence directory

    Args:
        root: Directory in the layout above
        pose_format: Overrides the format recorded in manifest.json

    Returns:
        Fixture with every pair listed in the manifest

    Raises:
        DataError: If a required file is missing or malformed
    """
    root = Path(root)
    manifest_path = root / "manifest.json"
    if not manifest_path.is_file():
        raise DataError(f"Missing manifest: {manifest_path}")
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise DataError(f"{manifest_path}: invalid JSON at line {e.lineno}: {e.msg}") from e

    fmt = pose_format or manifest.get("pose_format", "kitti")
    cam = load_camera(root / "camera.json")
    trajectory = load_poses(root / "poses.txt", fmt)
    pairs = [_load_pair(root, int(a), int(b)) for a, b in manifest.get("pairs", [])]
    for pair in pairs:
        if max(pair.frame_a, pair.frame_b) >= len(trajectory):
            raise DataError(
                f"Pair ({pair.frame_a}, {pair.frame_b}) exceeds {len(trajectory)} poses"
            )
    logger.info(f"Loaded fixture {root.name}: {len(trajectory)} frame(s), {len(pairs)} pair(s)")
    return Fixture(root=root, cam=cam, trajectory=trajectory, pairs=pairs, manifest=manifest)


def verify_clean_pairs(fixture: Fixture, tol: float = CLEAN_SAMPSON_TOL) -> float:
    """Largest pixel Sampson distance of the clean correspondences under ground truth."""
    worst = 0.0
    for pair in fixture.pairs:
        if not pair.clean:
            continue
        pose = fixture.true_relative(pair.frame_a, pair.frame_b)
        if np.linalg.norm(pose.t) == 0.0:
            continue
        x1, x2 = correspondence_arrays(pair.clean)
        values = sampson_residuals(fundamental_from_pose(pose, fixture.cam), x1, x2).values
        worst = max(worst, float(values.max(initial=0.0)))
        if worst > tol:
            raise DataError(
                f"Pair ({pair.frame_a}, {pair.frame_b}): clean correspondences are not "
                f"epipolar-consistent (Sampson {worst:.3e} > {tol:.1e})"
            )
    return worst


def write_fixture(
    root: Path,
    scene: Scene,
    observations: Sequence[PairObservation],
    *,
    seed: int,
    pose_format: PoseFormat = "kitti",
    extra: Optional[dict[str, Any]] = None,
) -> list[Path]:
    """Write a simulated sequence; returns every file written, in write order."""
    root = Path(root)
    (root / "pairs").mkdir(parents=True, exist_ok=True)
    written = [
        write_camera(root / "camera.json", scene.cam),
        write_poses(root / "poses.txt", Trajectory(scene.camera_to_world()), pose_format),
        write_points(root / "points.txt", scene.points3d),
    ]
    for obs in observations:
        a, b = obs.frame_a, obs.frame_b
        written += [
            write_correspondences(pair_file(root, a, b, ".corr"), obs.labeled.noisy),
            write_correspondences(pair_file(root, a, b, ".clean.corr"), obs.labeled.clean),
            write_depths(pair_file(root, a, b, ".depth"), obs.depths_a),
            write_descriptors(pair_file(root, a, b, ".a.desc"), obs.descriptors_a),
            write_descriptors(pair_file(root, a, b, ".b.desc"), obs.descriptors_b),
        ]
    manifest = {
        "frames": scene.n_frames,
        "pairs": [[obs.frame_a, obs.frame_b] for obs in observations],
        "pose_format": pose_format,
        "seed": seed,
        "version": __version__,
        **(extra or {}),
    }
    manifest_path = root / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", "utf-8")
    written.append(manifest_path)
    logger.info(f"Wrote fixture {root}: {scene.n_frames} frame(s), {len(observations)} pair(s)")
    return written


def labeled_pairs(fixture: Fixture) -> list[LabeledPair]:
    """Supervision pairs with pseudo ground truth from the fixture's poses.

    Pairs without depths or with a zero baseline are skipped. Sequences
    without clean correspondences use the pseudo ground truth in their place.
    """
    labeled = []
    for pair in fixture.pairs:
        pose = fixture.true_relative(pair.frame_a, pair.frame_b)
        if pair.depths is None or np.linalg.norm(pose.t) <= tolerances.DEGENERATE_EPS:
            logger.warning(f"Pair ({pair.frame_a}, {pair.frame_b}) skipped for supervision")
            continue
        pseudo_gt = pseudo_ground_truth(pair.correspondences, pose, fixture.cam)
        labeled.append(
            LabeledPair(
                noisy=pair.correspondences,
                clean=pair.clean if pair.clean is not None else pseudo_gt,
                pseudo_gt=pseudo_gt,
                true_pose=pose,
                depths=pair.depths,
                cam=fixture.cam,
            )
        )
    return labeled
