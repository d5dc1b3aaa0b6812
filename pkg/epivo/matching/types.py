"""Matching value types: descriptor sets, match matrices, correspondences."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from epivo.core.errors import DataError
from epivo.geometry.types import PixelPoint


@dataclass(frozen=True, eq=False)
class DescriptorSet:
    """n descriptors of dimension dim with their pixel locations."""

    descriptors: np.ndarray
    locations: np.ndarray

    def __post_init__(self) -> None:
        d = np.array(self.descriptors, dtype=np.float64)
        loc = np.array(self.locations, dtype=np.float64)
        if d.ndim != 2:
            raise DataError(f"Descriptors must be an n x dim matrix, got shape {d.shape}")
        if loc.shape != (d.shape[0], 2):
            raise DataError(f"Expected {d.shape[0]} locations of shape (n, 2), got {loc.shape}")
        if not (np.all(np.isfinite(d)) and np.all(np.isfinite(loc))):
            raise DataError("Descriptor rows and locations must be finite")
        d.setflags(write=False)
        loc.setflags(write=False)
        object.__setattr__(self, "descriptors", d)
        object.__setattr__(self, "locations", loc)

    @property
    def n(self) -> int:
        return self.descriptors.shape[0]

    @property
    def dim(self) -> int:
        return self.descriptors.shape[1]

    def location(self, index: int) -> PixelPoint:
        return PixelPoint.from_array(self.locations[index])


@dataclass(frozen=True, eq=False)
class MatchMatrix:
    """Sinkhorn output with its marginal residual history."""

    probabilities: np.ndarray
    residual: float
    residual_trace: tuple[float, ...] = field(default_factory=tuple)

    @property
    def shape(self) -> tuple[int, int]:
        return self.probabilities.shape


@dataclass(frozen=True)
class Correspondence:
    """A matched pixel pair with matching metadata.

    ``confidence`` is the match probability; ``similarity`` is the patch cosine
    score once re-ranking ran. ``index_a``/``index_b`` point back into the
    descriptor sets when the match came from the matcher.
    """

    x1: PixelPoint
    x2: PixelPoint
    confidence: float = 1.0
    descriptor_distance: float = 0.0
    similarity: Optional[float] = None
    index_a: Optional[int] = None
    index_b: Optional[int] = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.confidence <= 1.0:
            raise DataError(f"Correspondence confidence must lie in [0, 1], got {self.confidence}")
        if not self.descriptor_distance >= 0.0:
            raise DataError(
                f"Descriptor distance must be nonnegative, got {self.descriptor_distance}"
            )

    def moved(self, x1: np.ndarray, x2: np.ndarray) -> "Correspondence":
        return replace(self, x1=PixelPoint.from_array(x1), x2=PixelPoint.from_array(x2))


def correspondence_arrays(
    correspondences: Sequence[Correspondence],
) -> tuple[np.ndarray, np.ndarray]:
    """Stack endpoints into two (N, 2) arrays."""
    if not correspondences:
        return np.zeros((0, 2)), np.zeros((0, 2))
    x1 = np.array([[c.x1.u, c.x1.v] for c in correspondences], dtype=np.float64)
    x2 = np.array([[c.x2.u, c.x2.v] for c in correspondences], dtype=np.float64)
    return x1, x2


def with_points(
    correspondences: Sequence[Correspondence], x1: np.ndarray, x2: np.ndarray
) -> list[Correspondence]:
    """Copies of ``correspondences`` moved to new endpoints; metadata preserved."""
    return [c.moved(p, q) for c, p, q in zip(correspondences, x1, x2)]


def descriptor_distances(correspondences: Sequence[Correspondence]) -> np.ndarray:
    return np.array([c.descriptor_distance for c in correspondences], dtype=np.float64)
