"""
Per-stage training objectives.

    F1 = w1·L_samp
    F2 = w1·L_samp + w2·L_ddpm + w3·L_rec
    F3 = w1·L_align + w2·L_epi + w3·L_svd

L_samp: mean Sampson distance of (x1, x2) under ``matrix``.
L_ddpm: mean squared error of ε̂ against ε.
L_rec: mean squared error of reconstructed keypoints against the targets.
L_align: mean squared point-to-epipolar-line distance of (x1, x2) under
``matrix``, averaged over both images.
L_epi: weighted mean of (x̃₂ᵀ E x̃₁)² with E the hypothesis, on normalized points.
L_svd: (σ₁ − σ₂)² + σ₃² of the hypothesis.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Optional

import numpy as np

from epivo.core.errors import ConfigError, MissingStageInputError
from epivo.geometry.epipolar import (
    algebraic_residuals,
    epipolar_lines_batch,
    line_distances,
    sampson_residuals,
)
from epivo.geometry.types import CameraModel

Stage = Literal["F1", "F2", "F3"]

STAGE_COMPONENTS: dict[str, tuple[str, ...]] = {
    "F1": ("sampson",),
    "F2": ("sampson", "ddpm", "reconstruction"),
    "F3": ("align", "epi", "svd"),
}


@dataclass(frozen=True)
class LossWeights:
    w1: float = 1.0
    w2: float = 1.0
    w3: float = 1.0

    def __post_init__(self) -> None:
        values = (self.w1, self.w2, self.w3)
        if any(not np.isfinite(w) or w < 0 for w in values):
            raise ConfigError(f"Loss weights must be finite and >= 0, got {values}")
        if not any(values):
            raise ConfigError("Loss weights must not all be zero")

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.w1, self.w2, self.w3)


@dataclass(frozen=True, eq=False)
class StageInputs:
    """Everything a stage objective may need; each stage checks its own subset.

    ``x1``/``x2`` are pixel points scored under the pixel-space ``matrix``.
    ``hypothesis`` is an essential matrix on normalized points (needs ``cam``).
    """

    x1: Optional[np.ndarray] = None
    x2: Optional[np.ndarray] = None
    matrix: Optional[np.ndarray] = None
    eps_hat: Optional[np.ndarray] = None
    eps: Optional[np.ndarray] = None
    reconstructed: Optional[np.ndarray] = None
    target: Optional[np.ndarray] = None
    weights: Optional[np.ndarray] = None
    hypothesis: Optional[np.ndarray] = None
    cam: Optional[CameraModel] = None


@dataclass(frozen=True)
class StageLoss:
    stage: str
    total: float
    components: dict[str, float]


def _require(inputs: StageInputs, stage: str, *names: str) -> None:
    missing = [name for name in names if getattr(inputs, name) is None]
    if missing:
        raise MissingStageInputError(f"Stage {stage} needs {', '.join(missing)}")


def _mean_squared(a: np.ndarray, b: np.ndarray) -> float:
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise MissingStageInputError(f"Shape mismatch: {a.shape} vs {b.shape}")
    return float(np.mean((a - b) ** 2))


def sampson_loss(inputs: StageInputs) -> float:
    return sampson_residuals(inputs.matrix, inputs.x1, inputs.x2).mean()


def ddpm_loss(inputs: StageInputs) -> float:
    return _mean_squared(inputs.eps_hat, inputs.eps)


def reconstruction_loss(inputs: StageInputs) -> float:
    return _mean_squared(inputs.reconstructed, inputs.target)


def alignment_loss(inputs: StageInputs) -> float:
    lines_in_1, lines_in_2 = epipolar_lines_batch(inputs.matrix, inputs.x1, inputs.x2)
    d1 = line_distances(inputs.x1, lines_in_1)
    d2 = line_distances(inputs.x2, lines_in_2)
    return float(np.mean(np.concatenate([d1, d2]) ** 2))


def epipolar_loss(inputs: StageInputs) -> float:
    cam = inputs.cam
    x1, x2 = cam.normalize(inputs.x1), cam.normalize(inputs.x2)
    residuals = algebraic_residuals(inputs.hypothesis, x1, x2)
    if inputs.weights is None or np.sum(inputs.weights) <= 0:
        return float(np.mean(residuals**2))
    weights = np.asarray(inputs.weights, dtype=np.float64)
    return float(np.sum(weights * residuals**2) / weights.sum())


def svd_loss(inputs: StageInputs) -> float:
    s = np.linalg.svd(np.asarray(inputs.hypothesis, dtype=np.float64), compute_uv=False)
    return float((s[0] - s[1]) ** 2 + s[2] ** 2)


def stage_losses(
    stage: Stage, inputs: StageInputs, weights: LossWeights = LossWeights()
) -> StageLoss:
    """Weighted total and individual components of one stage objective."""
    if stage == "F1":
        _require(inputs, stage, "x1", "x2", "matrix")
        components = {"sampson": sampson_loss(inputs)}
    elif stage == "F2":
        _require(inputs, stage, "x1", "x2", "matrix", "eps_hat", "eps", "reconstructed", "target")
        components = {
            "sampson": sampson_loss(inputs),
            "ddpm": ddpm_loss(inputs),
            "reconstruction": reconstruction_loss(inputs),
        }
    elif stage == "F3":
        _require(inputs, stage, "x1", "x2", "matrix", "hypothesis", "cam")
        components = {
            "align": alignment_loss(inputs),
            "epi": epipolar_loss(inputs),
            "svd": svd_loss(inputs),
        }
    else:
        raise ConfigError(f"Unknown stage '{stage}' (expected F1, F2 or F3)")
    names = STAGE_COMPONENTS[stage]
    total = sum(w * components[name] for w, name in zip(weights.as_tuple(), names))
    return StageLoss(stage=stage, total=float(total), components=components)
