"""
Sparse matcher: dot-product scores, log-domain Sinkhorn, confidence threshold
with mutual-best filtering, and patch cosine top-K re-ranking.
"""

from __future__ import annotations

from typing import Mapping, Optional, Sequence

import numpy as np
from scipy.special import logsumexp

from epivo.core.errors import ConfigError, DataError, NoValidMatchError
from epivo.core.logger import logger
from epivo.geometry.types import PixelPoint
from epivo.matching.types import Correspondence, DescriptorSet, MatchMatrix
from epivo.settings import matcher_defaults

DEFAULT_TAU = matcher_defaults.TAU
DEFAULT_TEMPERATURE = matcher_defaults.TEMPERATURE
DEFAULT_ITERATIONS = matcher_defaults.SINKHORN_ITERATIONS


def score_matrix(a: DescriptorSet, b: DescriptorSet) -> np.ndarray:
    """S = A Bᵀ."""
    if a.dim != b.dim:
        raise DataError(f"Descriptor dimension mismatch: {a.dim} vs {b.dim}")
    return a.descriptors @ b.descriptors.T


def _marginals(n1: int, n2: int) -> tuple[np.ndarray, np.ndarray]:
    # Smaller side sums to 1; the larger side carries the same total mass.
    if n1 <= n2:
        return np.ones(n1), np.full(n2, n1 / n2)
    return np.full(n1, n2 / n1), np.ones(n2)


def sinkhorn(
    scores: np.ndarray,
    iterations: int = DEFAULT_ITERATIONS,
    temperature: float = DEFAULT_TEMPERATURE,
) -> MatchMatrix:
    """Alternating row/column normalization of exp(scores / temperature).

    Works in the log domain. ``residual`` is the L1 row-marginal error after
    each full iteration (columns are exact after their own step).
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 2 or scores.size == 0:
        raise DataError(f"Score matrix must be a non-empty 2D array, got shape {scores.shape}")
    if iterations < 1:
        raise ConfigError(f"Sinkhorn needs at least one iteration, got {iterations}")
    if not temperature > 0:
        raise ConfigError(f"Sinkhorn temperature must be positive, got {temperature}")
    if np.any(np.isnan(scores)) or np.any(scores == np.inf):
        raise DataError("Score matrix must not contain NaN or +inf")
    if np.any(np.all(np.isneginf(scores), axis=1)) or np.any(np.all(np.isneginf(scores), axis=0)):
        raise NoValidMatchError("A row or column of the score matrix is entirely -inf")

    n1, n2 = scores.shape
    row_target, col_target = _marginals(n1, n2)
    log_r, log_c = np.log(row_target), np.log(col_target)

    log_p = scores / temperature
    trace: list[float] = []
    for _ in range(iterations):
        log_p = log_p - (logsumexp(log_p, axis=1, keepdims=True) - log_r[:, None])
        log_p = log_p - (logsumexp(log_p, axis=0, keepdims=True) - log_c[None, :])
        p = np.exp(log_p)
        trace.append(float(np.sum(np.abs(p.sum(axis=1) - row_target))))

    logger.debug(f"Sinkhorn {n1}x{n2}: residual {trace[-1]:.3e} after {iterations} iterations")
    return MatchMatrix(probabilities=p, residual=trace[-1], residual_trace=tuple(trace))


def threshold_matches(
    p: MatchMatrix,
    tau: float,
    a: DescriptorSet,
    b: DescriptorSet,
) -> list[Correspondence]:
    """Keep (i, j) with P(i, j) > tau that are mutual best matches.

    Ties in the argmax go to the lower index. Output is sorted by (i, j).
    """
    if not 0.0 < tau <= 1.0:
        raise ConfigError(f"Confidence threshold must lie in (0, 1], got {tau}")
    probs = p.probabilities
    if probs.shape != (a.n, b.n):
        raise DataError(f"Match matrix {probs.shape} does not fit sets of size {a.n} and {b.n}")

    best_in_row = np.argmax(probs, axis=1)
    best_in_col = np.argmax(probs, axis=0)
    matches: list[Correspondence] = []
    for i, j in zip(*np.nonzero(probs > tau)):
        if best_in_row[i] != j or best_in_col[j] != i:
            continue
        matches.append(
            Correspondence(
                x1=a.location(int(i)),
                x2=b.location(int(j)),
                confidence=float(min(1.0, probs[i, j])),
                descriptor_distance=float(np.linalg.norm(a.descriptors[i] - b.descriptors[j])),
                index_a=int(i),
                index_b=int(j),
            )
        )
    return matches


def cosine_similarity(p: np.ndarray, q: np.ndarray) -> float:
    return float(np.dot(p, q) / (np.linalg.norm(p) * np.linalg.norm(q)))


def patch_cosine_topk(
    patches_a: Sequence[np.ndarray],
    patches_b: Sequence[np.ndarray],
    pairs: Sequence[tuple[int, int]],
    k: int,
    *,
    locations_a: Sequence[PixelPoint] | Mapping[int, PixelPoint],
    locations_b: Sequence[PixelPoint] | Mapping[int, PixelPoint],
    confidences: Optional[Sequence[float]] = None,
    descriptor_distances: Optional[Sequence[float]] = None,
) -> list[Correspondence]:
    """Score candidate pairs by patch cosine similarity and keep the k best.

    Candidates with a zero-norm patch are skipped and counted in a warning.
    The sort is stable, so equal similarities keep candidate order.
    """
    if k < 1:
        raise ConfigError(f"Top-K needs k >= 1, got {k}")

    scored: list[tuple[float, int]] = []
    excluded = 0
    for position, (i, j) in enumerate(pairs):
        pa = np.asarray(patches_a[i], dtype=np.float64)
        pb = np.asarray(patches_b[j], dtype=np.float64)
        if np.linalg.norm(pa) == 0.0 or np.linalg.norm(pb) == 0.0:
            excluded += 1
            continue
        similarity = float(np.clip(cosine_similarity(pa, pb), -1.0, 1.0))
        scored.append((similarity, position))

    if excluded:
        logger.warning(f"Top-K: excluded {excluded} candidate(s) with zero-norm patches")

    scored.sort(key=lambda item: -item[0])
    selected: list[Correspondence] = []
    for similarity, position in scored[:k]:
        i, j = pairs[position]
        selected.append(
            Correspondence(
                x1=locations_a[i],
                x2=locations_b[j],
                confidence=1.0 if confidences is None else float(confidences[position]),
                descriptor_distance=(
                    0.0 if descriptor_distances is None else float(descriptor_distances[position])
                ),
                similarity=similarity,
                index_a=int(i),
                index_b=int(j),
            )
        )
    return selected


def rerank_topk(
    matches: Sequence[Correspondence],
    patches_a: Sequence[np.ndarray],
    patches_b: Sequence[np.ndarray],
    k: int,
) -> list[Correspondence]:
    """Top-K re-ranking of thresholded matches, keeping their confidences."""
    pairs = [(m.index_a, m.index_b) for m in matches]
    if any(i is None or j is None for i, j in pairs):
        raise DataError("Re-ranking needs matches that carry descriptor indices")
    locations_a = {m.index_a: m.x1 for m in matches}
    locations_b = {m.index_b: m.x2 for m in matches}
    return patch_cosine_topk(
        patches_a,
        patches_b,
        pairs,
        k,
        locations_a=locations_a,
        locations_b=locations_b,
        confidences=[m.confidence for m in matches],
        descriptor_distances=[m.descriptor_distance for m in matches],
    )


# --- positional encoding and patches ---------------------------------------


def grid_indices(
    locations: np.ndarray, image_size: tuple[int, int], grid_shape: tuple[int, int]
) -> np.ndarray:
    """Map pixel locations (N, 2) to (row, col) cells of a ``grid_shape`` feature grid.

    ``image_size`` is (width, height).
    """
    width, height = image_size
    rows, cols = grid_shape
    locations = np.asarray(locations, dtype=np.float64)
    col = np.clip(np.floor(locations[:, 0] * cols / width), 0, cols - 1)
    row = np.clip(np.floor(locations[:, 1] * rows / height), 0, rows - 1)
    return np.column_stack([row, col]).astype(int)


def sinusoidal_encoding(cells: np.ndarray, dim: int) -> np.ndarray:
    """Fixed sin/cos encoding of integer (row, col) cells; half the channels per axis."""
    if dim % 4 != 0:
        raise ConfigError(f"Positional encoding dim must be a multiple of 4, got {dim}")
    cells = np.asarray(cells, dtype=np.float64)
    quarter = dim // 4
    freqs = 1.0 / (10000.0 ** (np.arange(quarter) / quarter))
    parts = []
    for axis in range(2):
        angles = cells[:, axis : axis + 1] * freqs[None, :]
        parts.extend([np.sin(angles), np.cos(angles)])
    return np.concatenate(parts, axis=1)


def append_positional_encoding(
    vectors: np.ndarray,
    locations: np.ndarray,
    image_size: tuple[int, int],
    grid_shape: tuple[int, int],
    dim: int = matcher_defaults.PE_DIM,
) -> np.ndarray:
    cells = grid_indices(locations, image_size, grid_shape)
    vectors = np.asarray(vectors, dtype=np.float64)
    return np.concatenate([vectors, sinusoidal_encoding(cells, dim)], axis=1)


def extract_patch(image: np.ndarray, center: PixelPoint, half_size: int) -> np.ndarray:
    """Flattened (2h+1)² window around ``center`` with zero padding outside the image."""
    image = np.asarray(image, dtype=np.float64)
    size = 2 * half_size + 1
    padded = np.pad(image, half_size, mode="constant")
    row = int(round(center.v)) + half_size
    col = int(round(center.u)) + half_size
    window = np.zeros((size, size))
    r0, c0 = row - half_size, col - half_size
    r_lo, c_lo = max(r0, 0), max(c0, 0)
    r_hi, c_hi = min(r0 + size, padded.shape[0]), min(c0 + size, padded.shape[1])
    if r_lo < r_hi and c_lo < c_hi:
        window[r_lo - r0 : r_hi - r0, c_lo - c0 : c_hi - c0] = padded[r_lo:r_hi, c_lo:c_hi]
    return window.ravel()


def match_descriptors(
    a: DescriptorSet,
    b: DescriptorSet,
    *,
    tau: float = DEFAULT_TAU,
    temperature: float = DEFAULT_TEMPERATURE,
    iterations: int = DEFAULT_ITERATIONS,
    top_k: Optional[int] = None,
    image_size: Optional[tuple[int, int]] = None,
    grid_shape: Optional[tuple[int, int]] = None,
    pe_dim: int = matcher_defaults.PE_DIM,
) -> list[Correspondence]:
    """Score → Sinkhorn → threshold, then optional positional-encoded top-K re-ranking."""
    p = sinkhorn(score_matrix(a, b), iterations=iterations, temperature=temperature)
    matches = threshold_matches(p, tau, a, b)
    logger.debug(f"Matcher: {len(matches)} match(es) above tau={tau}")
    if top_k is None or not matches:
        return matches
    patches_a, patches_b = a.descriptors, b.descriptors
    if image_size is not None and grid_shape is not None:
        patches_a = append_positional_encoding(
            patches_a, a.locations, image_size, grid_shape, pe_dim
        )
        patches_b = append_positional_encoding(
            patches_b, b.locations, image_size, grid_shape, pe_dim
        )
    return rerank_topk(matches, patches_a, patches_b, top_k)
