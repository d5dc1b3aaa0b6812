"""
Pseudo ground truth by epipolar-line projection, and labeled pair generation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from epivo.core.errors import DataError
from epivo.core.logger import logger
from epivo.geometry.epipolar import (
    MatrixLike,
    epipolar_lines_batch,
    fundamental_from_pose,
    project_to_lines_batch,
)
from epivo.geometry.types import CameraModel, PixelPoint, Pose
from epivo.matching.types import Correspondence, DescriptorSet, correspondence_arrays, with_points
from epivo.simulation.noise import NoiseConfig, perturb, perturb_pose
from epivo.simulation.scene import Scene, shared_points


def project_pairs_to_lines(
    f: MatrixLike, x1: np.ndarray, x2: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Move x2 onto F x̃1, then x1 onto Fᵀ x̃2 (corrected x2).

    The sequential order leaves each output pair exactly on each other's lines.
    Returns (x1', x2', degenerate mask); degenerate pairs are passed through.
    """
    _, line_in_2 = epipolar_lines_batch(f, x1, x2)
    new_x2, degenerate2 = project_to_lines_batch(x2, line_in_2)
    line_in_1, _ = epipolar_lines_batch(f, x1, new_x2)
    new_x1, degenerate1 = project_to_lines_batch(x1, line_in_1)
    degenerate = degenerate1 | degenerate2
    new_x1[degenerate] = x1[degenerate]
    new_x2[degenerate] = x2[degenerate]
    return new_x1, new_x2, degenerate


def pseudo_ground_truth(
    noisy: Sequence[Correspondence], true_pose: Pose, cam: CameraModel
) -> list[Correspondence]:
    """Project noisy matches onto their epipolar lines under the true pose."""
    if not noisy:
        return []
    f = fundamental_from_pose(true_pose, cam)
    x1, x2 = correspondence_arrays(noisy)
    new_x1, new_x2, degenerate = project_pairs_to_lines(f, x1, x2)
    if np.any(degenerate):
        logger.warning(
            f"Pseudo-GT: {int(degenerate.sum())} epipole-degenerate pair(s) left unchanged"
        )
    return with_points(noisy, new_x1, new_x2)


@dataclass(frozen=True, eq=False)
class LabeledPair:
    """Noisy, clean and pseudo-GT views of the same correspondences."""

    noisy: list[Correspondence]
    clean: list[Correspondence]
    pseudo_gt: list[Correspondence]
    true_pose: Pose
    depths: np.ndarray
    cam: CameraModel
    supervision_pose: Optional[Pose] = None

    def __post_init__(self) -> None:
        n = len(self.noisy)
        if not (len(self.clean) == n == len(self.pseudo_gt) == len(self.depths)):
            raise DataError("LabeledPair lists must have equal length")


@dataclass(frozen=True, eq=False)
class PairObservation:
    """What the pipeline sees for one frame pair of a synthetic scene."""

    frame_a: int
    frame_b: int
    labeled: LabeledPair
    descriptors_a: DescriptorSet
    descriptors_b: DescriptorSet
    depths_a: np.ndarray


def _view_descriptors(base: np.ndarray, noise_max: float, rng: np.random.Generator) -> np.ndarray:
    levels = rng.uniform(0.0, noise_max, size=(len(base), 1))
    noisy = base + levels * rng.normal(size=base.shape) / np.sqrt(base.shape[1])
    return noisy / np.linalg.norm(noisy, axis=1, keepdims=True)


def observe_pair(
    scene: Scene,
    a: int,
    b: int,
    noise: NoiseConfig,
    seed: int,
    *,
    descriptor_noise_max: float = 0.1,
) -> PairObservation:
    """Exact projections of shared points, perturbed, with descriptors and depths.

    Descriptor set B is a seeded permutation of the shared points so the
    matcher has to recover the pairing.
    """
    desc_seed, noise_seed, pose_seed, perm_seed = np.random.SeedSequence([int(seed), a, b]).spawn(4)
    cam = scene.cam
    idx = shared_points(scene, a, b)
    cam_a = scene.points_in_camera(a)[idx]
    cam_b = scene.points_in_camera(b)[idx]
    x1 = cam.project(cam_a)
    x2 = cam.project(cam_b)

    desc_rng = np.random.default_rng(desc_seed)
    base = scene.descriptors[idx]
    desc_a = _view_descriptors(base, descriptor_noise_max, desc_rng)
    desc_b = _view_descriptors(base, descriptor_noise_max, desc_rng)
    distances = np.linalg.norm(desc_a - desc_b, axis=1)

    clean = [
        Correspondence(
            x1=PixelPoint.from_array(p),
            x2=PixelPoint.from_array(q),
            confidence=1.0,
            descriptor_distance=float(d),
        )
        for p, q, d in zip(x1, x2, distances)
    ]
    true_pose = scene.relative_pose(a, b)
    noisy = perturb(clean, noise, cam, noise_seed)
    if scene.is_degenerate_pair(a, b):
        pgt = list(noisy)
    else:
        pgt = pseudo_ground_truth(noisy, true_pose, cam)
    depths = cam_a[:, 2].copy()

    labeled = LabeledPair(
        noisy=noisy,
        clean=clean,
        pseudo_gt=pgt,
        true_pose=true_pose,
        depths=depths,
        cam=cam,
        supervision_pose=perturb_pose(true_pose, noise, pose_seed),
    )

    noisy_x1, noisy_x2 = correspondence_arrays(noisy)
    perm = np.random.default_rng(perm_seed).permutation(len(idx))
    return PairObservation(
        frame_a=a,
        frame_b=b,
        labeled=labeled,
        descriptors_a=DescriptorSet(desc_a, noisy_x1),
        descriptors_b=DescriptorSet(desc_b[perm], noisy_x2[perm]),
        depths_a=depths,
    )


def make_labeled_pair(scene: Scene, a: int, b: int, noise: NoiseConfig, seed: int) -> LabeledPair:
    return observe_pair(scene, a, b, noise, seed).labeled
