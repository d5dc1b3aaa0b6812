"""
Whitespace-separated numeric text records.

Blank lines and lines starting with ``#`` are skipped; every error names the
file and the 1-based line it came from.
"""

from __future__ import annotations

from pathlib import Path
from typing import Iterable, NamedTuple, Optional, Sequence

import numpy as np

from epivo.core.errors import DataError, ParseError

FLOAT_FORMAT = "%.17g"


class Record(NamedTuple):
    line_number: int
    fields: list[str]


def read_records(path: Path) -> list[Record]:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"File not found: {path}")
    records = []
    with open(path, encoding="utf-8") as f:
        for line_number, line in enumerate(f, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            records.append(Record(line_number, stripped.split()))
    return records


def parse_floats(path: Path, record: Record, columns: Optional[int] = None) -> np.ndarray:
    if columns is not None and len(record.fields) != columns:
        raise ParseError(
            path, record.line_number, f"expected {columns} columns, got {len(record.fields)}"
        )
    try:
        values = np.array([float(v) for v in record.fields], dtype=np.float64)
    except ValueError as e:
        raise ParseError(path, record.line_number, f"not a number ({e})") from e
    if not np.all(np.isfinite(values)):
        raise ParseError(path, record.line_number, "non-finite value")
    return values


def parse_count(path: Path, record: Record, columns: int = 1) -> list[int]:
    """Header integers such as ``N`` or ``rows cols``."""
    if len(record.fields) != columns:
        raise ParseError(
            path, record.line_number, f"header needs {columns} integer(s), got {record.fields}"
        )
    try:
        counts = [int(v) for v in record.fields]
    except ValueError as e:
        raise ParseError(path, record.line_number, f"header is not an integer ({e})") from e
    if any(c < 0 for c in counts):
        raise ParseError(path, record.line_number, "header counts must be nonnegative")
    return counts


def read_counted_rows(path: Path, columns: int) -> np.ndarray:
    """A count line followed by exactly that many rows of ``columns`` floats."""
    records = read_records(path)
    if not records:
        raise ParseError(path, 1, "missing count header")
    (count,) = parse_count(path, records[0])
    rows = records[1:]
    if len(rows) != count:
        last = rows[-1].line_number if rows else records[0].line_number
        raise ParseError(path, last, f"header announces {count} row(s), found {len(rows)}")
    if not rows:
        return np.zeros((0, columns))
    return np.array([parse_floats(path, r, columns) for r in rows])


def format_row(values: Iterable[float]) -> str:
    return " ".join(FLOAT_FORMAT % float(v) for v in values)


def write_rows(path: Path, rows: Sequence[Iterable[float]], header: Optional[str] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [header] if header is not None else []
    lines.extend(format_row(row) for row in rows)
    path.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
    return path
