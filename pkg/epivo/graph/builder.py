"""
Stereo lifting of correspondences and the MST ∪ KNN correspondence graph.

Edge sets are sets of (i, j) with i < j. Both constructions are deterministic:
Kruskal sees candidate edges in lexicographic (i, j) order, so equal-length
edges resolve to the lexicographically smaller pair, and KNN ties go to the
lower neighbor index.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from typing import Literal, Optional, Sequence

import networkx as nx
import numpy as np
from scipy.spatial.distance import cdist

from epivo.core.errors import DataError, DegenerateGraphError
from epivo.core.logger import logger
from epivo.geometry.types import CameraModel
from epivo.matching.types import Correspondence, correspondence_arrays
from epivo.settings import graph_defaults

Edge = tuple[int, int]
LiftMode = Literal["depth", "disparity"]


@dataclass(frozen=True)
class Point3D:
    """Point in the first camera's frame (meters)."""

    x: float
    y: float
    z: float

    def __post_init__(self) -> None:
        if not self.z > 0:
            raise DataError(f"Lifted point must have positive depth, got z={self.z}")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])


class EdgeTag(str, Enum):
    MST = "mst"
    KNN = "knn"
    BOTH = "both"
    PIXEL = "pixel"


@dataclass(frozen=True, eq=False)
class LiftResult:
    points: list[Point3D]
    indices: np.ndarray
    dropped: int

    def as_array(self) -> np.ndarray:
        if not self.points:
            return np.zeros((0, 3))
        return np.array([p.as_array() for p in self.points])


def lift_with_indices(
    correspondences: Sequence[Correspondence],
    values: Sequence[float] | np.ndarray,
    cam: CameraModel,
    mode: LiftMode = "depth",
) -> LiftResult:
    """P = z·K⁻¹x̃₁ with z given directly or as fB/d; nonpositive values are dropped."""
    values = np.asarray(values, dtype=np.float64).reshape(-1)
    if len(values) != len(correspondences):
        raise DataError(f"{len(correspondences)} correspondences but {len(values)} depth values")
    valid = np.isfinite(values) & (values > 0)
    dropped = int(np.count_nonzero(~valid))
    if dropped:
        logger.warning(f"Lift: dropped {dropped} correspondence(s) with nonpositive {mode}")

    indices = np.nonzero(valid)[0]
    if len(indices) == 0:
        return LiftResult(points=[], indices=indices, dropped=dropped)
    z = values[indices] if mode == "depth" else cam.fx * cam.baseline / values[indices]
    x1, _ = correspondence_arrays([correspondences[i] for i in indices])
    rays = cam.normalize(x1)
    points = [Point3D(float(u * d), float(v * d), float(d)) for (u, v), d in zip(rays, z)]
    return LiftResult(points=points, indices=indices, dropped=dropped)


def lift(
    correspondences: Sequence[Correspondence],
    values: Sequence[float] | np.ndarray,
    cam: CameraModel,
    mode: LiftMode = "depth",
) -> list[Point3D]:
    return lift_with_indices(correspondences, values, cam, mode).points


def _as_coordinates(points: Sequence[Point3D] | np.ndarray) -> np.ndarray:
    if isinstance(points, np.ndarray):
        return points.reshape(len(points), -1).astype(np.float64)
    return np.array([p.as_array() for p in points]).reshape(len(points), 3)


def mst_edges(points: Sequence[Point3D] | np.ndarray) -> set[Edge]:
    """Euclidean minimum spanning tree (Kruskal over the complete graph)."""
    coords = _as_coordinates(points)
    n = len(coords)
    if n < 2:
        return set()
    distances = cdist(coords, coords)
    complete = nx.Graph()
    complete.add_nodes_from(range(n))
    complete.add_weighted_edges_from(
        (i, j, distances[i, j]) for i in range(n) for j in range(i + 1, n)
    )
    tree = nx.minimum_spanning_edges(complete, algorithm="kruskal", data=False)
    return {(min(i, j), max(i, j)) for i, j in tree}


def knn_edges(points: Sequence[Point3D] | np.ndarray, k: int = graph_defaults.KNN_K) -> set[Edge]:
    """Each node joined to its k nearest neighbors, symmetrized."""
    if k < 1:
        raise DataError(f"KNN needs k >= 1, got {k}")
    coords = _as_coordinates(points)
    n = len(coords)
    if n < 2:
        return set()
    distances = cdist(coords, coords)
    index = np.arange(n)
    edges: set[Edge] = set()
    for i in range(n):
        order = np.lexsort((index, distances[i]))
        neighbors = [j for j in order if j != i][: min(k, n - 1)]
        edges.update((min(i, int(j)), max(i, int(j))) for j in neighbors)
    return edges


def tag_edges(mst: set[Edge], knn: set[Edge]) -> dict[Edge, EdgeTag]:
    tags: dict[Edge, EdgeTag] = {}
    for edge in sorted(mst | knn):
        if edge in mst and edge in knn:
            tags[edge] = EdgeTag.BOTH
        else:
            tags[edge] = EdgeTag.MST if edge in mst else EdgeTag.KNN
    return tags


@dataclass(frozen=True, eq=False)
class CorrespondenceGraph:
    """Lifted correspondences with MST ∪ KNN edges and per-node weights in [0, 1].

    ``source_indices[i]`` is the position of node i in the list the graph was
    built from. ``pixel_edges`` is the optional 2D proximity edge set over x₁.
    """

    points: np.ndarray
    correspondences: list[Correspondence]
    source_indices: np.ndarray
    edges: dict[Edge, EdgeTag]
    weights: np.ndarray
    cam: CameraModel
    pixel_edges: Optional[frozenset[Edge]] = None

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=np.float64)
        if len(w) != len(self.points):
            raise DataError("One weight per node is required")
        if np.any(~np.isfinite(w)) or np.any(w < 0) or np.any(w > 1):
            raise DataError("Node weights must lie in [0, 1]")
        object.__setattr__(self, "weights", w)

    @property
    def n(self) -> int:
        return len(self.points)

    def with_weights(self, weights: np.ndarray) -> "CorrespondenceGraph":
        return replace(self, weights=np.asarray(weights, dtype=np.float64))

    def edge_list(self) -> list[tuple[int, int, EdgeTag]]:
        out = [(i, j, tag) for (i, j), tag in sorted(self.edges.items())]
        if self.pixel_edges:
            out.extend((i, j, EdgeTag.PIXEL) for i, j in sorted(self.pixel_edges))
        return out

    def to_networkx(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(range(self.n))
        g.add_edges_from(self.edges)
        return g

    def is_connected(self) -> bool:
        return self.n > 0 and nx.is_connected(self.to_networkx())

    def neighbors(self) -> list[np.ndarray]:
        adjacency: list[list[int]] = [[] for _ in range(self.n)]
        for i, j in self.edges:
            adjacency[i].append(j)
            adjacency[j].append(i)
        return [np.array(sorted(a), dtype=int) for a in adjacency]

    def degrees(self) -> np.ndarray:
        return np.array([len(a) for a in self.neighbors()], dtype=np.float64)

    def normalized_points(self) -> tuple[np.ndarray, np.ndarray]:
        x1, x2 = correspondence_arrays(self.correspondences)
        return self.cam.normalize(x1), self.cam.normalize(x2)


def build_graph(
    correspondences: Sequence[Correspondence],
    values: Sequence[float] | np.ndarray,
    cam: CameraModel,
    k: int = graph_defaults.KNN_K,
    *,
    mode: LiftMode = "depth",
    pixel_k: Optional[int] = None,
) -> CorrespondenceGraph:
    """Lift, then join the MST and KNN edge sets; node weights start at 1."""
    lifted = lift_with_indices(correspondences, values, cam, mode)
    if len(lifted.points) < 2:
        raise DegenerateGraphError(
            f"Graph needs at least 2 liftable correspondences, got {len(lifted.points)}"
        )
    coords = lifted.as_array()
    kept = [correspondences[i] for i in lifted.indices]

    mst = mst_edges(coords)
    knn = knn_edges(coords, k)
    pixel_edges = None
    if pixel_k is not None:
        x1, _ = correspondence_arrays(kept)
        pixel_edges = frozenset(knn_edges(x1, pixel_k))

    graph = CorrespondenceGraph(
        points=coords,
        correspondences=kept,
        source_indices=lifted.indices,
        edges=tag_edges(mst, knn),
        weights=np.ones(len(coords)),
        cam=cam,
        pixel_edges=pixel_edges,
    )
    logger.debug(
        f"Graph: {graph.n} nodes, {len(mst)} MST + {len(knn)} KNN edges -> {len(graph.edges)}"
    )
    return graph
