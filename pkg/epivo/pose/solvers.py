"""
Linear essential-matrix solvers on K-normalized coordinates.

Both the plain eight-point solver and the weighted solve share one core: the
smallest eigenvector of AᵀWA for the Hartley-normalized design matrix A,
denormalized, projected to singular values (σ, σ, 0), Frobenius-normalized and
signed so the largest-magnitude entry is positive.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from epivo.core.errors import (
    DataError,
    DegenerateConfigurationError,
    NonDifferentiablePointError,
    PipelineError,
)
from epivo.core.logger import logger
from epivo.geometry.epipolar import fundamental_from_essential, sampson_residuals
from epivo.geometry.types import CameraModel, EssentialMatrix
from epivo.pose.types import EssentialHypothesis, SolverTag
from epivo.settings import tolerances

MIN_POINTS = 5
FULL_RANK_POINTS = 8


def hartley_transform(points: np.ndarray) -> np.ndarray:
    """Similarity moving the centroid to 0 and the mean distance to √2."""
    centroid = points.mean(axis=0)
    mean_dist = np.mean(np.linalg.norm(points - centroid, axis=1))
    if mean_dist <= tolerances.DEGENERATE_EPS:
        raise DegenerateConfigurationError(
            "All points coincide; the design matrix has no unique null vector"
        )
    s = np.sqrt(2.0) / mean_dist
    return np.array([[s, 0.0, -s * centroid[0]], [0.0, s, -s * centroid[1]], [0.0, 0.0, 1.0]])


@dataclass(frozen=True, eq=False)
class DesignMatrix:
    """Rows kron(x̃₂, x̃₁) of the Hartley-normalized points.

    Each row satisfies row·vec(Eₙ) = x̃₂ᵀEₙx̃₁.

    ``t1``/``t2`` are the normalizing transforms; E = t2ᵀ Eₙ t1.
    """

    rows: np.ndarray
    t1: np.ndarray
    t2: np.ndarray

    @classmethod
    def from_points(cls, x1: np.ndarray, x2: np.ndarray) -> "DesignMatrix":
        x1 = np.asarray(x1, dtype=np.float64).reshape(-1, 2)
        x2 = np.asarray(x2, dtype=np.float64).reshape(-1, 2)
        if len(x1) != len(x2):
            raise DataError(f"Point sets differ in length: {len(x1)} vs {len(x2)}")
        if len(x1) < MIN_POINTS:
            raise DataError(
                f"Design matrix needs at least {MIN_POINTS} correspondences, got {len(x1)}"
            )
        if not (np.all(np.isfinite(x1)) and np.all(np.isfinite(x2))):
            raise DataError("Correspondence coordinates must be finite")
        if max(np.max(np.abs(x1)), np.max(np.abs(x2))) > tolerances.CONDITIONING_LIMIT:
            logger.warning(
                "Solver input looks like pixel coordinates; normalize by K for good conditioning"
            )
        t1 = hartley_transform(x1)
        t2 = hartley_transform(x2)
        h1 = np.column_stack([x1, np.ones(len(x1))]) @ t1.T
        h2 = np.column_stack([x2, np.ones(len(x2))]) @ t2.T
        rows = np.einsum("ni,nj->nij", h2, h1).reshape(-1, 9)
        return cls(rows=rows, t1=t1, t2=t2)

    @property
    def n(self) -> int:
        return len(self.rows)


@dataclass(frozen=True, eq=False)
class WeightedSolution:
    """Weighted solve output; ``gradient[:, i]`` is d(null_vector)/d(weight i)."""

    hypothesis: EssentialHypothesis
    null_vector: np.ndarray
    eigenvalues: np.ndarray
    gradient: Optional[np.ndarray] = None


def _check_weights(weights: np.ndarray, n: int) -> np.ndarray:
    w = np.asarray(weights, dtype=np.float64).reshape(-1)
    if len(w) != n:
        raise DataError(f"Expected {n} weights, got {len(w)}")
    if np.any(~np.isfinite(w)) or np.any(w < 0):
        raise DataError("Weights must be finite and non-negative")
    if not np.any(w > 0):
        raise DegenerateConfigurationError("All weights are zero")
    return w


def _eigen_core(a: DesignMatrix, w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    m = a.rows.T @ (w[:, None] * a.rows)
    eigvals, eigvecs = np.linalg.eigh(m)
    support = int(np.count_nonzero(w > 0))
    if support < FULL_RANK_POINTS:
        logger.warning(f"Linear solve on {support} correspondence(s); the null space is not unique")
    elif eigvals[1] <= tolerances.NULLSPACE_TOL * max(eigvals[-1], tolerances.DEGENERATE_EPS):
        raise DegenerateConfigurationError(
            "Design matrix null space has dimension > 1 (coplanar or collinear configuration)"
        )
    return eigvals, eigvecs


def _to_essential(null_vector: np.ndarray, a: DesignMatrix) -> tuple[np.ndarray, float]:
    """Denormalize and project to (σ, σ, 0) with unit Frobenius norm; returns E and the sign."""
    e = a.t2.T @ null_vector.reshape(3, 3) @ a.t1
    u, s, vt = np.linalg.svd(e)
    sigma = 0.5 * (s[0] + s[1])
    e = u @ np.diag([sigma, sigma, 0.0]) @ vt
    e = e / np.linalg.norm(e)
    sign = 1.0 if e.flat[np.argmax(np.abs(e))] >= 0 else -1.0
    return sign * e, sign


def _hypothesis(
    e: np.ndarray, x1: np.ndarray, x2: np.ndarray, tag: SolverTag, weights: Optional[np.ndarray]
) -> EssentialHypothesis:
    matrix = EssentialMatrix(e)
    score = sampson_residuals(matrix, x1, x2).mean()
    return EssentialHypothesis(e=matrix, sampson_score=score, solver_tag=tag, weights_used=weights)


def eigenvector_gradient(
    rows: np.ndarray, eigvals: np.ndarray, eigvecs: np.ndarray, e0: np.ndarray
) -> np.ndarray:
    """Derivative of the smallest eigenvector of M = Σ wᵢ aᵢaᵢᵀ with respect to each wᵢ.

    d e₀ / d wᵢ = −Σ_{k≠0} e_k (e_kᵀaᵢ)(aᵢᵀe₀) / (λ_k − λ₀)
    """
    gap = eigvals[1] - eigvals[0]
    if gap <= tolerances.EIGENGAP_TOL * max(1.0, abs(eigvals[-1])):
        raise NonDifferentiablePointError(
            f"Smallest eigenvalue is repeated (gap {gap:.3e}); gradient undefined"
        )
    others = eigvecs[:, 1:]
    proj = rows @ others
    along = rows @ e0
    coeff = proj * along[:, None] / (eigvals[1:] - eigvals[0])[None, :]
    return -others @ coeff.T


def weighted_svd_solve(
    a: DesignMatrix,
    weights: np.ndarray,
    *,
    x1: Optional[np.ndarray] = None,
    x2: Optional[np.ndarray] = None,
    with_gradient: bool = True,
    tag: SolverTag = SolverTag.WEIGHTED_SVD,
) -> WeightedSolution:
    """min ‖diag(√w) A e‖ s.t. ‖e‖ = 1 via eigh(AᵀWA), with the analytic gradient.

    The null vector's sign follows the sign fix applied to E. ``x1``/``x2``
    (the unnormalized input points) are only used for the Sampson score.
    """
    w = _check_weights(weights, a.n)
    eigvals, eigvecs = _eigen_core(a, w)
    e, sign = _to_essential(eigvecs[:, 0], a)
    null_vector = sign * eigvecs[:, 0]

    if x1 is not None and x2 is not None:
        hypothesis = _hypothesis(e, x1, x2, tag, w)
    else:
        hypothesis = EssentialHypothesis(
            e=EssentialMatrix(e), sampson_score=float("nan"), solver_tag=tag, weights_used=w
        )

    gradient = None
    if with_gradient:
        gradient = eigenvector_gradient(a.rows, eigvals, eigvecs, null_vector)
    return WeightedSolution(
        hypothesis=hypothesis, null_vector=null_vector, eigenvalues=eigvals, gradient=gradient
    )


def eight_point(
    x1: np.ndarray, x2: np.ndarray, weights: Optional[np.ndarray] = None
) -> EssentialHypothesis:
    """Normalized eight-point estimate; optional weights give the weighted least-squares form."""
    a = DesignMatrix.from_points(x1, x2)
    w = np.ones(a.n) if weights is None else weights
    tag = SolverTag.EIGHT_POINT if weights is None else SolverTag.WEIGHTED_SVD
    solution = weighted_svd_solve(a, w, x1=x1, x2=x2, with_gradient=False, tag=tag)
    return solution.hypothesis


def pixel_fundamental(x1: np.ndarray, x2: np.ndarray, cam: CameraModel) -> Optional[np.ndarray]:
    """Eight-point F estimate from pixel matches, or None when it cannot be formed."""
    if len(x1) < FULL_RANK_POINTS:
        return None
    try:
        hypothesis = eight_point(cam.normalize(x1), cam.normalize(x2))
    except PipelineError as e:
        logger.debug(f"No pose-free F estimate: {e}")
        return None
    return fundamental_from_essential(hypothesis.e, cam).matrix
