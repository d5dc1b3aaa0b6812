"""
Per-pair and per-frame inputs: correspondences, depths, disparity grids,
descriptor sets, camera calibration and world points.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from pydantic import ValidationError
from scipy.interpolate import RegularGridInterpolator

from epivo.core.errors import DataError, ParseError
from epivo.core.logger import logger
from epivo.core.schemas import CameraSchema
from epivo.datasets.records import (
    parse_count,
    parse_floats,
    read_counted_rows,
    read_records,
    write_rows,
)
from epivo.geometry.types import CameraModel, PixelPoint
from epivo.matching.types import Correspondence, DescriptorSet

CORRESPONDENCE_COLUMNS = 6


def load_correspondences(path: Path) -> list[Correspondence]:
    """Count header, then ``u1 v1 u2 v2 confidence descriptor_distance`` rows."""
    rows = read_counted_rows(path, CORRESPONDENCE_COLUMNS)
    records = read_records(path)[1:]
    matches = []
    for record, (u1, v1, u2, v2, confidence, distance) in zip(records, rows):
        try:
            matches.append(
                Correspondence(
                    x1=PixelPoint(float(u1), float(v1)),
                    x2=PixelPoint(float(u2), float(v2)),
                    confidence=float(confidence),
                    descriptor_distance=float(distance),
                )
            )
        except DataError as e:
            raise ParseError(path, record.line_number, str(e)) from e
    return matches


def write_correspondences(path: Path, matches: Sequence[Correspondence]) -> Path:
    rows = [
        (c.x1.u, c.x1.v, c.x2.u, c.x2.v, c.confidence, c.descriptor_distance) for c in matches
    ]
    return write_rows(path, rows, header=str(len(rows)))


def load_depths(path: Path) -> np.ndarray:
    """Count header, then one value per correspondence (depth in meters or disparity in px)."""
    return read_counted_rows(path, 1).reshape(-1)


def write_depths(path: Path, values: Sequence[float]) -> Path:
    values = np.asarray(values, dtype=np.float64).reshape(-1, 1)
    return write_rows(path, values, header=str(len(values)))


@dataclass(frozen=True, eq=False)
class DisparityGrid:
    """Dense disparity (px) on the pixel grid; row r, column c is pixel (u=c, v=r)."""

    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2 or min(values.shape) < 2:
            raise DataError(
                f"Disparity grid must be 2D with at least 2x2 cells, got {values.shape}"
            )
        object.__setattr__(self, "values", values)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def sample(self, pixels: np.ndarray) -> np.ndarray:
        """Bilinear disparity at (u, v) pixels; NaN outside the grid."""
        rows, cols = self.shape
        interpolator = RegularGridInterpolator(
            (np.arange(rows, dtype=np.float64), np.arange(cols, dtype=np.float64)),
            self.values,
            method="linear",
            bounds_error=False,
            fill_value=np.nan,
        )
        pixels = np.asarray(pixels, dtype=np.float64).reshape(-1, 2)
        sampled = interpolator(pixels[:, ::-1])
        outside = int(np.count_nonzero(np.isnan(sampled)))
        if outside:
            logger.warning(f"Disparity grid: {outside} pixel(s) fall outside the grid")
        return sampled


def load_disparity_grid(path: Path) -> DisparityGrid:
    """``rows cols`` header, then ``rows`` lines of ``cols`` floats."""
    records = read_records(path)
    if not records:
        raise ParseError(path, 1, "missing grid header")
    rows, cols = parse_count(path, records[0], columns=2)
    body = records[1:]
    if len(body) != rows:
        last = body[-1].line_number if body else records[0].line_number
        raise ParseError(path, last, f"header announces {rows} row(s), found {len(body)}")
    return DisparityGrid(np.array([parse_floats(path, r, cols) for r in body]))


def write_disparity_grid(path: Path, grid: DisparityGrid) -> Path:
    rows, cols = grid.shape
    return write_rows(path, grid.values, header=f"{rows} {cols}")


def load_descriptors(path: Path) -> DescriptorSet:
    """``n dim`` header, n descriptor rows, then n ``u v`` location rows."""
    records = read_records(path)
    if not records:
        raise ParseError(path, 1, "missing descriptor header")
    n, dim = parse_count(path, records[0], columns=2)
    body = records[1:]
    if len(body) != 2 * n:
        last = body[-1].line_number if body else records[0].line_number
        raise ParseError(path, last, f"expected {2 * n} row(s) after the header, found {len(body)}")
    if n == 0:
        return DescriptorSet(np.zeros((0, dim)), np.zeros((0, 2)))
    descriptors = np.array([parse_floats(path, r, dim) for r in body[:n]])
    locations = np.array([parse_floats(path, r, 2) for r in body[n:]])
    return DescriptorSet(descriptors, locations)


def write_descriptors(path: Path, descriptors: DescriptorSet) -> Path:
    rows = [*descriptors.descriptors, *descriptors.locations]
    return write_rows(path, rows, header=f"{descriptors.n} {descriptors.dim}")


def load_camera(path: Path) -> CameraModel:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"Camera file not found: {path}")
    try:
        with open(path, encoding="utf-8") as f:
            schema = CameraSchema.model_validate(json.load(f))
    except json.JSONDecodeError as e:
        raise ParseError(path, e.lineno, e.msg) from e
    except ValidationError as e:
        raise DataError(f"{path}: invalid camera ({e.error_count()} error(s)): {e}") from e
    return CameraModel(**schema.model_dump())


def write_camera(path: Path, cam: CameraModel) -> Path:
    schema = CameraSchema(
        fx=cam.fx,
        fy=cam.fy,
        cx=cam.cx,
        cy=cam.cy,
        baseline=cam.baseline,
        k1=cam.k1,
        k2=cam.k2,
        width=cam.width,
        height=cam.height,
    )
    path = Path(path)
    path.write_text(json.dumps(schema.model_dump(), indent=2, sort_keys=True) + "\n", "utf-8")
    return path


def load_points(path: Path) -> np.ndarray:
    records = read_records(path)
    if not records:
        return np.zeros((0, 3))
    return np.array([parse_floats(path, r, 3) for r in records])


def write_points(path: Path, points: np.ndarray) -> Path:
    return write_rows(path, np.asarray(points, dtype=np.float64).reshape(-1, 3))
