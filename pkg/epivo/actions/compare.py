"""
Variant comparison over one sequence - the ablation table
"""

import csv
from pathlib import Path
from typing import Any, NamedTuple

from epivo.actions.common import finish_outputs
from epivo.actions.run import execute_pipeline
from epivo.core.config_loader import require_dataset
from epivo.core.env_validator import Settings
from epivo.core.logger import logger
from epivo.core.schemas import RunConfig
from epivo.datasets.fixture import load_fixture
from epivo.pipeline.report import MetricsReport


class Variant(NamedTuple):
    name: str
    overrides: dict[str, Any]


VARIANTS: tuple[Variant, ...] = (
    Variant("matcher+ransac", {"pipeline.refinement": False, "pipeline.solver": "ransac"}),
    Variant("matcher+refine+ransac", {"pipeline.refinement": True, "pipeline.solver": "ransac"}),
    Variant("matcher+refine+graph+svd", {"pipeline.refinement": True, "pipeline.solver": "multi"}),
)

TABLE_COLUMNS = ("variant", "rre", "rte", "sampson", "ate", "ape", "ape_r", "fallbacks")


def _row(name: str, report: MetricsReport) -> dict[str, Any]:
    data = report.summary_items()
    return {"variant": name, **{key: data[key] for key in TABLE_COLUMNS[1:]}}


def _cell(value: Any) -> str:
    if value is None:
        return "n/a"
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def write_comparison_csv(path: Path, rows: list[dict[str, Any]]) -> Path:
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(TABLE_COLUMNS)
        for row in rows:
            writer.writerow(["" if row[c] is None else row[c] for c in TABLE_COLUMNS])
    return path


def write_comparison_text(path: Path, rows: list[dict[str, Any]]) -> Path:
    """Fixed-width table, one line per variant."""
    cells = [list(TABLE_COLUMNS)] + [[_cell(row[c]) for c in TABLE_COLUMNS] for row in rows]
    widths = [max(len(line[k]) for line in cells) for k in range(len(TABLE_COLUMNS))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(line, widths)).rstrip() for line in cells]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def run_compare_action(config: RunConfig, output_dir: Path, settings: Settings) -> list[Path]:
    """Run every variant on the configured sequence and tabulate the errors."""
    fixture = load_fixture(require_dataset(config), config.dataset.pose_format)
    rows = []
    for variant in VARIANTS:
        logger.info(f"Variant {variant.name}")
        run = execute_pipeline(config.with_overrides(**variant.overrides), fixture, settings)
        rows.append(_row(variant.name, run.report))

    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    written = [
        write_comparison_csv(output_dir / "comparison.csv", rows),
        write_comparison_text(output_dir / "comparison.txt", rows),
    ]
    return finish_outputs(output_dir, config, written)
