"""
Immutable geometric value types.

Matrices are stored as read-only float64 numpy arrays; every constructor
validates the invariants of its type and raises a ``GeometryError`` subclass.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from epivo.core.errors import CalibrationError, GeometryError, InvalidRotationError
from epivo.settings import tolerances


def _frozen(array: Iterable, shape: tuple[int, ...], name: str) -> np.ndarray:
    out = np.array(array, dtype=np.float64)
    if out.shape != shape:
        raise GeometryError(f"{name} must have shape {shape}, got {out.shape}")
    if not np.all(np.isfinite(out)):
        raise GeometryError(f"{name} must be finite")
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class PixelPoint:
    """A 2D image point in pixels (or normalized camera coordinates)."""

    u: float
    v: float

    def __post_init__(self) -> None:
        if not (np.isfinite(self.u) and np.isfinite(self.v)):
            raise GeometryError(f"PixelPoint must be finite, got ({self.u}, {self.v})")

    @property
    def homogeneous(self) -> np.ndarray:
        return np.array([self.u, self.v, 1.0])

    def as_array(self) -> np.ndarray:
        return np.array([self.u, self.v])

    @classmethod
    def from_array(cls, xy) -> "PixelPoint":
        return cls(float(xy[0]), float(xy[1]))


@dataclass(frozen=True)
class CameraModel:
    """Pinhole stereo camera: intrinsics, baseline, radial distortion and image size."""

    fx: float
    fy: float
    cx: float
    cy: float
    baseline: float
    k1: float = 0.0
    k2: float = 0.0
    width: int = 640
    height: int = 480

    def __post_init__(self) -> None:
        if not (self.fx > 0 and self.fy > 0):
            raise CalibrationError(
                f"Focal lengths must be positive, got fx={self.fx}, fy={self.fy}"
            )
        if not self.baseline > 0:
            raise CalibrationError(f"Stereo baseline must be positive, got {self.baseline}")
        if self.width <= 0 or self.height <= 0:
            raise CalibrationError(f"Image size must be positive, got {self.width}x{self.height}")

    @property
    def K(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])

    @property
    def K_inv(self) -> np.ndarray:
        return np.array(
            [
                [1.0 / self.fx, 0.0, -self.cx / self.fx],
                [0.0, 1.0 / self.fy, -self.cy / self.fy],
                [0.0, 0.0, 1.0],
            ]
        )

    def normalize(self, pixels: np.ndarray) -> np.ndarray:
        """Pixels (N, 2) to normalized camera coordinates (N, 2)."""
        pixels = np.asarray(pixels, dtype=np.float64)
        return np.column_stack(
            [(pixels[:, 0] - self.cx) / self.fx, (pixels[:, 1] - self.cy) / self.fy]
        )

    def denormalize(self, normalized: np.ndarray) -> np.ndarray:
        normalized = np.asarray(normalized, dtype=np.float64)
        return np.column_stack(
            [normalized[:, 0] * self.fx + self.cx, normalized[:, 1] * self.fy + self.cy]
        )

    def project(self, points_cam: np.ndarray) -> np.ndarray:
        """Project camera-frame points (N, 3) with positive depth to pixels (N, 2)."""
        points_cam = np.asarray(points_cam, dtype=np.float64)
        z = points_cam[:, 2]
        return np.column_stack(
            [self.fx * points_cam[:, 0] / z + self.cx, self.fy * points_cam[:, 1] / z + self.cy]
        )

    def in_image(self, pixels: np.ndarray) -> np.ndarray:
        pixels = np.asarray(pixels, dtype=np.float64)
        return (
            (pixels[:, 0] >= 0)
            & (pixels[:, 0] < self.width)
            & (pixels[:, 1] >= 0)
            & (pixels[:, 1] < self.height)
        )


@dataclass(frozen=True, eq=False)
class Rotation:
    """3x3 rotation matrix; rejects anything not orthonormal with det +1."""

    matrix: np.ndarray

    def __post_init__(self) -> None:
        m = _frozen(self.matrix, (3, 3), "Rotation")
        deviation = np.max(np.abs(m.T @ m - np.eye(3)))
        if deviation > tolerances.ORTHONORMAL_TOL:
            raise InvalidRotationError(
                f"Matrix is not orthonormal (max |RᵀR - I| = {deviation:.3e})"
            )
        det = np.linalg.det(m)
        if abs(det - 1.0) > tolerances.DET_TOL:
            raise InvalidRotationError(f"Rotation determinant must be +1, got {det:.12f}")
        object.__setattr__(self, "matrix", m)

    @classmethod
    def identity(cls) -> "Rotation":
        return cls(np.eye(3))

    @classmethod
    def nearest(cls, matrix: np.ndarray) -> "Rotation":
        """Project an almost-rotation onto SO(3) (polar decomposition via SVD)."""
        u, _, vt = np.linalg.svd(np.asarray(matrix, dtype=np.float64))
        d = np.sign(np.linalg.det(u @ vt))
        return cls(u @ np.diag([1.0, 1.0, d]) @ vt)

    @property
    def T(self) -> "Rotation":
        return Rotation(self.matrix.T)

    def __matmul__(self, other: "Rotation") -> "Rotation":
        return Rotation.nearest(self.matrix @ other.matrix)


@dataclass(frozen=True, eq=False)
class Pose:
    """Rigid transform X' = R X + t.

    When ``scale_free`` is set the translation is a unit direction.
    """

    rotation: Rotation
    translation: np.ndarray
    scale_free: bool = False

    def __post_init__(self) -> None:
        t = _frozen(self.translation, (3,), "translation")
        object.__setattr__(self, "translation", t)
        if self.scale_free and abs(np.linalg.norm(t) - 1.0) > tolerances.UNIT_NORM_TOL:
            raise GeometryError(
                f"Scale-free pose needs a unit translation, got norm {np.linalg.norm(t):.12f}"
            )

    @classmethod
    def identity(cls) -> "Pose":
        return cls(Rotation.identity(), np.zeros(3))

    @classmethod
    def from_matrix(cls, matrix: np.ndarray, *, scale_free: bool = False) -> "Pose":
        """Build from a 3x4 or 4x4 homogeneous matrix."""
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.shape not in ((3, 4), (4, 4)):
            raise GeometryError(f"Pose matrix must be 3x4 or 4x4, got {matrix.shape}")
        return cls(Rotation(matrix[:3, :3]), matrix[:3, 3], scale_free=scale_free)

    @property
    def R(self) -> np.ndarray:
        return self.rotation.matrix

    @property
    def t(self) -> np.ndarray:
        return self.translation

    def matrix(self) -> np.ndarray:
        out = np.eye(4)
        out[:3, :3] = self.R
        out[:3, 3] = self.t
        return out

    def inverse(self) -> "Pose":
        rt = self.R.T
        return Pose(Rotation(rt), -rt @ self.t, scale_free=self.scale_free)

    def compose(self, other: "Pose") -> "Pose":
        """``self ∘ other`` as 4x4 homogeneous product (apply ``other`` first)."""
        return Pose(
            Rotation.nearest(self.R @ other.R),
            self.R @ other.t + self.t,
        )

    def apply(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=np.float64) @ self.R.T + self.t

    def with_translation(self, translation: np.ndarray, *, scale_free: bool) -> "Pose":
        return Pose(self.rotation, translation, scale_free=scale_free)

    def unit(self) -> "Pose":
        """Same rotation, translation normalized to a unit direction."""
        norm = np.linalg.norm(self.t)
        if norm <= tolerances.DEGENERATE_EPS:
            raise GeometryError("Cannot normalize a zero translation")
        return Pose(self.rotation, self.t / norm, scale_free=True)


def _rank_two(m: np.ndarray, name: str) -> None:
    s = np.linalg.svd(m, compute_uv=False)
    if s[0] <= 0 or s[2] >= tolerances.RANK_TOL * s[0]:
        raise GeometryError(f"{name} must be rank 2 (singular values {s})")


@dataclass(frozen=True, eq=False)
class EssentialMatrix:
    """Calibrated two-view relation x₂ᵀ E x₁ = 0 on normalized coordinates."""

    matrix: np.ndarray

    def __post_init__(self) -> None:
        m = _frozen(self.matrix, (3, 3), "EssentialMatrix")
        _rank_two(m, "EssentialMatrix")
        object.__setattr__(self, "matrix", m)

    def singular_values(self) -> np.ndarray:
        return np.linalg.svd(self.matrix, compute_uv=False)


@dataclass(frozen=True, eq=False)
class FundamentalMatrix:
    """Pixel-space two-view relation x̃₂ᵀ F x̃₁ = 0."""

    matrix: np.ndarray

    def __post_init__(self) -> None:
        m = _frozen(self.matrix, (3, 3), "FundamentalMatrix")
        _rank_two(m, "FundamentalMatrix")
        object.__setattr__(self, "matrix", m)


@dataclass(frozen=True)
class EpipolarLine:
    """Line aU + bV + c = 0."""

    a: float
    b: float
    c: float = field(default=0.0)

    @property
    def coefficients(self) -> np.ndarray:
        return np.array([self.a, self.b, self.c])

    @property
    def degenerate(self) -> bool:
        return self.a * self.a + self.b * self.b <= tolerances.DEGENERATE_EPS**2

    def residual(self, x: PixelPoint) -> float:
        return float(self.a * x.u + self.b * x.v + self.c)
