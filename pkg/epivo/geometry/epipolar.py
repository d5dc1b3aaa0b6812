"""
Epipolar geometry: essential/fundamental matrices, lines, projection, Sampson distance.

Single-point functions take ``PixelPoint`` values; the ``*_batch`` variants take
(N, 2) arrays and are what the solvers and pipeline use internally.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from epivo.core.errors import CalibrationError, DegenerateLineError, DegenerateTranslationError
from epivo.core.logger import logger
from epivo.geometry.types import (
    CameraModel,
    EpipolarLine,
    EssentialMatrix,
    FundamentalMatrix,
    PixelPoint,
    Pose,
)
from epivo.settings import tolerances

MatrixLike = Union[EssentialMatrix, FundamentalMatrix, np.ndarray]


def as_matrix(m: MatrixLike) -> np.ndarray:
    if isinstance(m, (EssentialMatrix, FundamentalMatrix)):
        return m.matrix
    out = np.asarray(m, dtype=np.float64)
    if out.shape != (3, 3):
        raise ValueError(f"Expected a 3x3 matrix, got {out.shape}")
    return out


def homogeneous(points: np.ndarray) -> np.ndarray:
    points = np.asarray(points, dtype=np.float64)
    return np.column_stack([points, np.ones(len(points))])


def skew(v) -> np.ndarray:
    """Cross-product matrix: ``skew(v) @ w == np.cross(v, w)``."""
    x, y, z = np.asarray(v, dtype=np.float64).reshape(3)
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def essential_from_pose(pose: Pose) -> EssentialMatrix:
    """E = [t]ₓ R for the point-transfer pose X₂ = R X₁ + t."""
    if np.linalg.norm(pose.t) <= tolerances.DEGENERATE_EPS:
        raise DegenerateTranslationError("Essential matrix is undefined for zero translation")
    return EssentialMatrix(skew(pose.t) @ pose.R)


def fundamental_from_essential(e: EssentialMatrix, cam: CameraModel) -> FundamentalMatrix:
    """F = K⁻ᵀ E K⁻¹ (same K for both views)."""
    k = cam.K
    if abs(np.linalg.det(k)) <= tolerances.DEGENERATE_EPS:
        raise CalibrationError("Intrinsic matrix is singular")
    k_inv = cam.K_inv
    return FundamentalMatrix(k_inv.T @ as_matrix(e) @ k_inv)


def fundamental_from_pose(pose: Pose, cam: CameraModel) -> FundamentalMatrix:
    return fundamental_from_essential(essential_from_pose(pose), cam)


def epipolar_lines(
    f: MatrixLike, x0: PixelPoint, x1: PixelPoint
) -> tuple[EpipolarLine, EpipolarLine]:
    """Return ``(l0, l1)`` with ``l1 = F x̃0`` (in view 1) and ``l0 = Fᵀ x̃1`` (in view 0)."""
    m = as_matrix(f)
    l1 = m @ x0.homogeneous
    l0 = m.T @ x1.homogeneous
    return EpipolarLine(*map(float, l0)), EpipolarLine(*map(float, l1))


def epipolar_lines_batch(
    f: MatrixLike, x0: np.ndarray, x1: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized ``epipolar_lines``: returns (N, 3) arrays ``(l0, l1)``."""
    m = as_matrix(f)
    return homogeneous(x1) @ m, homogeneous(x0) @ m.T


def project_to_line(x: PixelPoint, line: EpipolarLine) -> PixelPoint:
    """x − (lᵀx̃ / (a² + b²))·(a, b): orthogonal projection of x onto the line."""
    if line.degenerate:
        raise DegenerateLineError(f"Cannot project onto degenerate line {line}")
    scale = line.residual(x) / (line.a * line.a + line.b * line.b)
    return PixelPoint(x.u - scale * line.a, x.v - scale * line.b)


def project_to_lines_batch(points: np.ndarray, lines: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Project each point onto its line; degenerate lines leave the point unchanged.

    Returns the projected points and the degenerate mask.
    """
    points = np.asarray(points, dtype=np.float64)
    lines = np.asarray(lines, dtype=np.float64)
    norm_sq = lines[:, 0] ** 2 + lines[:, 1] ** 2
    degenerate = norm_sq <= tolerances.DEGENERATE_EPS**2
    safe = np.where(degenerate, 1.0, norm_sq)
    residual = lines[:, 0] * points[:, 0] + lines[:, 1] * points[:, 1] + lines[:, 2]
    scale = np.where(degenerate, 0.0, residual / safe)
    projected = points - scale[:, None] * lines[:, :2]
    return projected, degenerate


def line_distances(points: np.ndarray, lines: np.ndarray) -> np.ndarray:
    """Perpendicular point-to-line distances; NaN-free (degenerate lines give 0)."""
    points = np.asarray(points, dtype=np.float64)
    lines = np.asarray(lines, dtype=np.float64)
    norm = np.hypot(lines[:, 0], lines[:, 1])
    residual = lines[:, 0] * points[:, 0] + lines[:, 1] * points[:, 1] + lines[:, 2]
    distance = np.abs(residual) / np.maximum(norm, 1e-300)
    return np.where(norm > tolerances.DEGENERATE_EPS, distance, 0.0)


@dataclass(frozen=True)
class SampsonResult:
    """Sampson distance of one pair; ``degenerate`` marks a vanishing denominator."""

    value: float
    degenerate: bool = False


@dataclass(frozen=True, eq=False)
class SampsonBatch:
    values: np.ndarray
    degenerate: np.ndarray

    def mean(self) -> float:
        """Mean over non-degenerate entries (0 when there are none)."""
        valid = ~self.degenerate
        if not np.any(valid):
            return 0.0
        return float(np.mean(self.values[valid]))

    def weighted_mean(self, weights: np.ndarray) -> float:
        valid = ~self.degenerate
        w = np.asarray(weights, dtype=np.float64)[valid]
        if w.sum() <= 0:
            return self.mean()
        return float(np.sum(w * self.values[valid]) / w.sum())


def sampson_residuals(m: MatrixLike, x1: np.ndarray, x2: np.ndarray) -> SampsonBatch:
    """Per row: d_S = (x₂ᵀMx₁)² / ((Mx₁)₁² + (Mx₁)₂² + (Mᵀx₂)₁² + (Mᵀx₂)₂²)."""
    mat = as_matrix(m)
    h1 = homogeneous(x1)
    h2 = homogeneous(x2)
    mx1 = h1 @ mat.T
    mtx2 = h2 @ mat
    numerator = np.einsum("ij,ij->i", h2, mx1) ** 2
    denominator = mx1[:, 0] ** 2 + mx1[:, 1] ** 2 + mtx2[:, 0] ** 2 + mtx2[:, 1] ** 2
    degenerate = denominator <= tolerances.SAMPSON_DENOM_EPS
    values = np.where(degenerate, 0.0, numerator / np.where(degenerate, 1.0, denominator))
    if np.any(degenerate):
        logger.debug(f"Sampson: {int(degenerate.sum())} epipole-degenerate pair(s) flagged")
    return SampsonBatch(values=values, degenerate=degenerate)


def sampson_distance(m: MatrixLike, x1: PixelPoint, x2: PixelPoint) -> SampsonResult:
    batch = sampson_residuals(m, x1.as_array()[None, :], x2.as_array()[None, :])
    return SampsonResult(value=float(batch.values[0]), degenerate=bool(batch.degenerate[0]))


def algebraic_residuals(m: MatrixLike, x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
    """x₂ᵀ M x₁ per row."""
    mat = as_matrix(m)
    return np.einsum("ij,ij->i", homogeneous(x2), homogeneous(x1) @ mat.T)
