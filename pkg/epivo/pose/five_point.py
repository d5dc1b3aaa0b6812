"""
Minimal five-point essential-matrix solver.

E = xX + yY + zZ + W spans the null space of the 5×9 design matrix. The
cubic constraints det(E) = 0 and 2EEᵀE − tr(EEᵀ)E = 0 give ten equations in
twenty monomials; Gauss-Jordan elimination of the cubic block leaves an action
matrix for multiplication by x whose eigenvectors hold (x, y, z).
Polynomials are dense coefficient cubes c[i, j, k] of xⁱyʲzᵏ, degree ≤ 3.
"""

from __future__ import annotations

import numpy as np
from scipy.signal import convolve

from epivo.core.errors import DataError, DegenerateConfigurationError
from epivo.core.logger import logger
from epivo.geometry.epipolar import sampson_residuals
from epivo.geometry.types import EssentialMatrix
from epivo.pose.types import EssentialHypothesis, SolverTag

CUBIC_MONOMIALS = (
    (3, 0, 0), (2, 1, 0), (2, 0, 1), (1, 2, 0), (1, 1, 1),
    (1, 0, 2), (0, 3, 0), (0, 2, 1), (0, 1, 2), (0, 0, 3),
)  # fmt: skip
BASIS_MONOMIALS = (
    (2, 0, 0), (1, 1, 0), (1, 0, 1), (0, 2, 0), (0, 1, 1),
    (0, 0, 2), (1, 0, 0), (0, 1, 0), (0, 0, 1), (0, 0, 0),
)  # fmt: skip
MONOMIALS = CUBIC_MONOMIALS + BASIS_MONOMIALS

MAX_SOLUTIONS = 10
IMAG_TOL = 1e-8


def _linear(x: float, y: float, z: float, w: float) -> np.ndarray:
    p = np.zeros((4, 4, 4))
    p[1, 0, 0], p[0, 1, 0], p[0, 0, 1], p[0, 0, 0] = x, y, z, w
    return p


def _mul(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    return convolve(p, q, method="direct")[:4, :4, :4]


def _constraint_matrix(basis: np.ndarray) -> np.ndarray:
    """10×20 coefficients of the cubic constraints over ``MONOMIALS``."""
    X, Y, Z, W = (basis[i].reshape(3, 3) for i in range(4))
    e = [[_linear(X[r, c], Y[r, c], Z[r, c], W[r, c]) for c in range(3)] for r in range(3)]

    det = (
        _mul(e[0][0], _mul(e[1][1], e[2][2]) - _mul(e[1][2], e[2][1]))
        - _mul(e[0][1], _mul(e[1][0], e[2][2]) - _mul(e[1][2], e[2][0]))
        + _mul(e[0][2], _mul(e[1][0], e[2][1]) - _mul(e[1][1], e[2][0]))
    )
    eet = [[sum(_mul(e[i][k], e[j][k]) for k in range(3)) for j in range(3)] for i in range(3)]
    trace = eet[0][0] + eet[1][1] + eet[2][2]
    polys = [det]
    for i in range(3):
        for j in range(3):
            cubic = 2.0 * sum(_mul(eet[i][k], e[k][j]) for k in range(3)) - _mul(trace, e[i][j])
            polys.append(cubic)
    return np.array([[p[m] for m in MONOMIALS] for p in polys])


def _action_matrix(c: np.ndarray) -> np.ndarray:
    block = c[:, :10]
    if np.linalg.cond(block) > 1e14:
        raise DegenerateConfigurationError("Five-point elimination template is singular")
    reduced = np.linalg.solve(block, c[:, 10:])
    action = np.zeros((10, 10))
    action[:6] = -reduced[:6]
    action[6, 0] = action[7, 1] = action[8, 2] = action[9, 6] = 1.0
    return action


def _essential_structure(e: np.ndarray) -> np.ndarray:
    u, s, vt = np.linalg.svd(e)
    sigma = 0.5 * (s[0] + s[1])
    e = u @ np.diag([sigma, sigma, 0.0]) @ vt
    e = e / np.linalg.norm(e)
    return e if e.flat[np.argmax(np.abs(e))] >= 0 else -e


def five_point(x1: np.ndarray, x2: np.ndarray) -> list[EssentialHypothesis]:
    """All real essential matrices consistent with exactly five normalized pairs."""
    x1 = np.asarray(x1, dtype=np.float64).reshape(-1, 2)
    x2 = np.asarray(x2, dtype=np.float64).reshape(-1, 2)
    if len(x1) != 5 or len(x2) != 5:
        raise DataError(f"Five-point solver needs exactly 5 pairs, got {len(x1)} and {len(x2)}")

    h1 = np.column_stack([x1, np.ones(5)])
    h2 = np.column_stack([x2, np.ones(5)])
    design = np.einsum("ni,nj->nij", h2, h1).reshape(5, 9)
    _, s, vt = np.linalg.svd(design)
    if s[4] <= 1e-10 * s[0]:
        raise DegenerateConfigurationError(
            "Five-point design matrix is rank deficient (repeated points?)"
        )
    basis = vt[5:]

    eigvals, eigvecs = np.linalg.eig(_action_matrix(_constraint_matrix(basis)))
    hypotheses: list[EssentialHypothesis] = []
    for k in range(len(eigvals)):
        if abs(eigvals[k].imag) > IMAG_TOL * max(1.0, abs(eigvals[k])):
            continue
        v = eigvecs[:, k].real
        if abs(v[9]) <= 1e-12 * np.max(np.abs(v)):
            continue
        x, y, z = v[6] / v[9], v[7] / v[9], v[8] / v[9]
        e = (x * basis[0] + y * basis[1] + z * basis[2] + basis[3]).reshape(3, 3)
        try:
            matrix = EssentialMatrix(_essential_structure(e))
        except ValueError:
            continue
        score = sampson_residuals(matrix, x1, x2).mean()
        hypotheses.append(
            EssentialHypothesis(e=matrix, sampson_score=score, solver_tag=SolverTag.FIVE_POINT)
        )

    logger.debug(f"Five-point: {len(hypotheses)} real solution(s)")
    return hypotheses[:MAX_SOLUTIONS]
