"""
Correspondence noise model: projection, matching, and calibration terms on
pixels, plus bounded pose perturbation and an isotropic Gaussian fit.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from epivo.core.errors import ConfigError
from epivo.geometry.rotation import rotation_exp
from epivo.geometry.types import CameraModel, Pose, Rotation
from epivo.matching.types import (
    Correspondence,
    correspondence_arrays,
    descriptor_distances,
    with_points,
)

SeedLike = Union[int, np.random.SeedSequence]


@dataclass(frozen=True)
class NoiseConfig:
    """Noise parameters.

    sigma_p: projection noise std (px). alpha, beta: matching variance
    σ_m²(d) = alpha·d + beta (px²). delta_theta_max (rad) and delta_t_max (m):
    uniform pose perturbation bounds. k1_err, k2_err: distortion coefficient errors.
    """

    sigma_p: float = 0.0
    delta_theta_max: float = 0.0
    delta_t_max: float = 0.0
    alpha: float = 0.0
    beta: float = 0.0
    k1_err: float = 0.0
    k2_err: float = 0.0

    def __post_init__(self) -> None:
        for name in ("sigma_p", "alpha", "beta", "delta_theta_max", "delta_t_max"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value >= 0):
                raise ConfigError(f"NoiseConfig.{name} must be finite and >= 0, got {value}")
        if not (np.isfinite(self.k1_err) and np.isfinite(self.k2_err)):
            raise ConfigError("Distortion errors must be finite")


def calibration_residual(
    pixels: np.ndarray, cam: CameraModel, k1_err: float, k2_err: float
) -> np.ndarray:
    """x(k1'r² + k2'r⁴) − x(k1r² + k2r⁴) with x measured from the principal point.

    Evaluated in normalized coordinates and returned in pixels; zero at the
    principal point.
    """
    normalized = cam.normalize(pixels)
    r2 = np.sum(normalized**2, axis=1)
    factor = k1_err * r2 + k2_err * r2**2
    shift = normalized * factor[:, None]
    return shift * np.array([cam.fx, cam.fy])


def perturb(
    clean: Sequence[Correspondence],
    cfg: NoiseConfig,
    cam: CameraModel,
    seed: SeedLike,
) -> list[Correspondence]:
    """Add projection, matching and calibration noise to both endpoints.

    The random stream is drawn in a fixed layout regardless of which terms are
    active, so a seed always maps to the same noise for a given input length.
    """
    if not clean:
        return []
    rng = np.random.default_rng(seed)
    x1, x2 = correspondence_arrays(clean)
    n = len(clean)
    projection = rng.normal(0.0, 1.0, size=(2, n, 2)) * cfg.sigma_p
    matching_unit = rng.normal(0.0, 1.0, size=(2, n, 2))
    sigma_m = np.sqrt(cfg.alpha * descriptor_distances(clean) + cfg.beta)
    matching = matching_unit * sigma_m[None, :, None]

    noisy1 = x1 + projection[0] + matching[0]
    noisy2 = x2 + projection[1] + matching[1]
    if cfg.k1_err or cfg.k2_err:
        noisy1 = noisy1 + calibration_residual(x1, cam, cfg.k1_err, cfg.k2_err)
        noisy2 = noisy2 + calibration_residual(x2, cam, cfg.k1_err, cfg.k2_err)
    return with_points(clean, noisy1, noisy2)


def apply_pose_perturbation(pose: Pose, delta_theta, delta_t) -> Pose:
    """R' = R·exp([δθ]ₓ), t' = t + δt."""
    rotation = Rotation.nearest(pose.R @ rotation_exp(delta_theta).matrix)
    return Pose(rotation, pose.t + np.asarray(delta_t, dtype=np.float64))


def perturb_pose(pose: Pose, cfg: NoiseConfig, seed: SeedLike) -> Pose:
    """Uniform δθ in ±delta_theta_max and δt in ±delta_t_max per component."""
    rng = np.random.default_rng(seed)
    delta_theta = rng.uniform(-1.0, 1.0, 3) * cfg.delta_theta_max
    delta_t = rng.uniform(-1.0, 1.0, 3) * cfg.delta_t_max
    if not (np.any(delta_theta) or np.any(delta_t)):
        return pose
    return apply_pose_perturbation(pose, delta_theta, delta_t)


@dataclass(frozen=True, eq=False)
class IsotropicFit:
    """Best isotropic Gaussian for a 2D displacement sample."""

    sigma: float
    mean: np.ndarray
    covariance: np.ndarray

    @property
    def anisotropy(self) -> float:
        """|off-diagonal| / mean diagonal of the sample covariance."""
        diag = 0.5 * (self.covariance[0, 0] + self.covariance[1, 1])
        return float(abs(self.covariance[0, 1]) / diag) if diag > 0 else 0.0


def fit_isotropic_sigma(displacements: np.ndarray) -> IsotropicFit:
    """Maximum-likelihood σ of N(μ, σ²I): σ² = tr(Σ) / 2."""
    d = np.asarray(displacements, dtype=np.float64).reshape(-1, 2)
    if len(d) == 0:
        return IsotropicFit(sigma=0.0, mean=np.zeros(2), covariance=np.zeros((2, 2)))
    mean = d.mean(axis=0)
    centered = d - mean
    covariance = centered.T @ centered / len(d)
    sigma = float(np.sqrt(np.trace(covariance) / 2.0))
    return IsotropicFit(sigma=sigma, mean=mean, covariance=covariance)
