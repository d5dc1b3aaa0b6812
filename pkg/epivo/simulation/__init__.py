"""Synthetic scenes, the correspondence noise model, and pseudo ground truth."""

from epivo.simulation.noise import (
    IsotropicFit,
    NoiseConfig,
    apply_pose_perturbation,
    calibration_residual,
    fit_isotropic_sigma,
    perturb,
    perturb_pose,
)
from epivo.simulation.pseudo_gt import (
    LabeledPair,
    PairObservation,
    make_labeled_pair,
    observe_pair,
    project_pairs_to_lines,
    pseudo_ground_truth,
)
from epivo.simulation.scene import (
    Scene,
    SceneConfig,
    StereoDepths,
    default_camera,
    depth_from_disparity,
    disparity_from_depth,
    generate_scene,
    shared_points,
    stereo_depths,
)

__all__ = [
    "IsotropicFit",
    "LabeledPair",
    "NoiseConfig",
    "PairObservation",
    "Scene",
    "SceneConfig",
    "StereoDepths",
    "apply_pose_perturbation",
    "calibration_residual",
    "default_camera",
    "depth_from_disparity",
    "disparity_from_depth",
    "fit_isotropic_sigma",
    "generate_scene",
    "make_labeled_pair",
    "observe_pair",
    "perturb",
    "perturb_pose",
    "project_pairs_to_lines",
    "pseudo_ground_truth",
    "shared_points",
    "stereo_depths",
]
