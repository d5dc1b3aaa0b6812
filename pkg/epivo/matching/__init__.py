"""Descriptor matching: scores, Sinkhorn, thresholding, patch top-K."""

from epivo.matching.matcher import (
    DEFAULT_ITERATIONS,
    DEFAULT_TAU,
    DEFAULT_TEMPERATURE,
    append_positional_encoding,
    cosine_similarity,
    extract_patch,
    grid_indices,
    match_descriptors,
    patch_cosine_topk,
    rerank_topk,
    score_matrix,
    sinkhorn,
    sinusoidal_encoding,
    threshold_matches,
)
from epivo.matching.types import (
    Correspondence,
    DescriptorSet,
    MatchMatrix,
    correspondence_arrays,
    descriptor_distances,
    with_points,
)

__all__ = [
    "DEFAULT_ITERATIONS",
    "DEFAULT_TAU",
    "DEFAULT_TEMPERATURE",
    "Correspondence",
    "DescriptorSet",
    "MatchMatrix",
    "append_positional_encoding",
    "correspondence_arrays",
    "cosine_similarity",
    "descriptor_distances",
    "extract_patch",
    "grid_indices",
    "match_descriptors",
    "patch_cosine_topk",
    "rerank_topk",
    "score_matrix",
    "sinkhorn",
    "sinusoidal_encoding",
    "threshold_matches",
    "with_points",
]
