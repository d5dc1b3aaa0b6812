"""Text dumps of solver hypotheses and correspondence graphs for offline inspection."""

from __future__ import annotations

from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from epivo.core.errors import ParseError
from epivo.datasets.records import FLOAT_FORMAT, format_row, parse_floats, read_records
from epivo.graph.builder import CorrespondenceGraph, EdgeTag
from epivo.pose.types import EssentialHypothesis


class HypothesisRow(NamedTuple):
    matrix: np.ndarray
    score: float
    tag: str


def write_hypotheses(path: Path, hypotheses: Sequence[EssentialHypothesis]) -> Path:
    """One line per hypothesis: 9 row-major entries, Sampson score, solver tag."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [
        f"{format_row(h.matrix.reshape(-1))} {FLOAT_FORMAT % h.sampson_score} {h.solver_tag.value}"
        for h in hypotheses
    ]
    path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    return path


def load_hypotheses(path: Path) -> list[HypothesisRow]:
    rows = []
    for record in read_records(path):
        if len(record.fields) != 11:
            raise ParseError(
                path, record.line_number, f"expected 11 fields, got {len(record.fields)}"
            )
        numbers = parse_floats(path, record._replace(fields=record.fields[:10]), 10)
        rows.append(HypothesisRow(numbers[:9].reshape(3, 3), float(numbers[9]), record.fields[10]))
    return rows


def write_graph(path: Path, graph: CorrespondenceGraph) -> Path:
    """``# nodes`` (index x y z weight) then ``# edges`` (i j tag)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["# nodes"]
    lines.extend(
        f"{i} {format_row([*point, weight])}"
        for i, (point, weight) in enumerate(zip(graph.points, graph.weights))
    )
    lines.append("# edges")
    lines.extend(f"{i} {j} {tag.value}" for i, j, tag in graph.edge_list())
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


class GraphDump(NamedTuple):
    points: np.ndarray
    weights: np.ndarray
    edges: list[tuple[int, int, EdgeTag]]


def load_graph(path: Path) -> GraphDump:
    section = None
    nodes: list[np.ndarray] = []
    edges: list[tuple[int, int, EdgeTag]] = []
    with open(path, encoding="utf-8") as f:
        for line_number, line in enumerate(f, start=1):
            stripped = line.strip()
            if stripped in ("# nodes", "# edges"):
                section = stripped[2:]
                continue
            if not stripped:
                continue
            fields = stripped.split()
            if section == "nodes" and len(fields) == 5:
                nodes.append(np.array([float(v) for v in fields[1:]]))
            elif section == "edges" and len(fields) == 3:
                try:
                    edges.append((int(fields[0]), int(fields[1]), EdgeTag(fields[2])))
                except ValueError as e:
                    raise ParseError(path, line_number, str(e)) from e
            else:
                raise ParseError(path, line_number, f"unexpected line in section '{section}'")
    table = np.array(nodes).reshape(-1, 4)
    return GraphDump(points=table[:, :3], weights=table[:, 3], edges=edges)
