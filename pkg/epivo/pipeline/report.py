"""
Sequence metrics report and its files.

``summary.txt`` holds sorted ``key = value`` lines, ``metrics.json`` the full
model, ``per_frame.csv`` one row per frame pair and ``manifest.json`` the
config hash, seeds and output list. Every file is a pure function of the
report, so reruns with the same config and seed are byte-identical.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from epivo import __version__
from epivo.core.logger import logger
from epivo.geometry.types import Pose
from epivo.pipeline.estimator import SequenceResult
from epivo.pipeline.metrics import AbsoluteErrors, AlignmentMode, absolute_metrics, relative_metrics
from epivo.pipeline.trajectory import Trajectory

PER_FRAME_COLUMNS = (
    "frame",
    "rre_deg",
    "rte_m",
    "rte_angle_deg",
    "sampson",
    "sampson_before",
    "sampson_after",
    "cum_ate_m",
    "fallback",
)


class FrameMetrics(BaseModel):
    model_config = ConfigDict(extra="forbid")

    frame: int = Field(..., ge=0, description="Index of the first frame of the pair")
    rre_deg: Optional[float] = None
    rte_m: Optional[float] = None
    rte_angle_deg: Optional[float] = None
    sampson: Optional[float] = None
    sampson_before: Optional[float] = None
    sampson_after: Optional[float] = None
    cum_ate_m: Optional[float] = None
    fallback: bool = False


class MetricsReport(BaseModel):
    """Sequence-level means plus per-pair rows; absent ground truth leaves errors unset."""

    model_config = ConfigDict(extra="forbid")

    frames: int = Field(..., ge=1, description="Number of poses in the estimated trajectory")
    pairs: int = Field(..., ge=0)
    fallbacks: int = Field(default=0, ge=0)
    alignment: str = Field(..., description="Alignment used for ATE: none, rigid or similarity")
    scale_mode: str = Field(..., description="stereo (metric) or scale-free")
    rre: Optional[float] = Field(default=None, ge=0, description="Mean rotation error, degrees")
    rte: Optional[float] = Field(default=None, ge=0, description="Mean translation error, m")
    rte_angle: Optional[float] = Field(default=None, ge=0, description="Mean direction error, deg")
    sampson: Optional[float] = Field(default=None, ge=0)
    sampson_before: Optional[float] = Field(default=None, ge=0)
    sampson_after: Optional[float] = Field(default=None, ge=0)
    ate: Optional[float] = Field(default=None, ge=0, description="Aligned RMS position error, m")
    ape: Optional[float] = Field(default=None, ge=0, description="Unaligned RMS position error, m")
    ape_r: Optional[float] = Field(default=None, ge=0, description="Mean rotation error, degrees")
    aggregation_loss: Optional[float] = Field(
        default=None, ge=0, description="Mean weighted aggregation-stage objective over pairs"
    )
    per_frame: list[FrameMetrics] = Field(default_factory=list)

    def summary_items(self) -> dict[str, Any]:
        return self.model_dump(exclude={"per_frame"})


def _finite(value: Optional[float]) -> Optional[float]:
    if value is None or not math.isfinite(value):
        return None
    return float(value)


def _mean(values: Sequence[Optional[float]]) -> Optional[float]:
    kept = [v for v in values if v is not None]
    return float(np.mean(kept)) if kept else None


def build_report(
    result: SequenceResult,
    estimated: Trajectory,
    *,
    truth: Optional[Trajectory] = None,
    truth_relatives: Optional[Sequence[Pose]] = None,
    alignment: AlignmentMode = "rigid",
    aggregation_losses: Optional[Sequence[Optional[float]]] = None,
) -> MetricsReport:
    """Collect pair diagnostics and, when ground truth is given, all error metrics.

    ``truth`` must be expressed in the estimate's frame (see ``Trajectory.anchored``);
    ``truth_relatives`` are point-transfer poses aligned with ``result.relatives``.
    """
    absolute: Optional[AbsoluteErrors] = None
    if truth is not None:
        absolute = absolute_metrics(estimated, truth, alignment)
    cumulative = absolute.cumulative_ate() if absolute is not None else None

    rows: list[FrameMetrics] = []
    for k, estimate in enumerate(result.estimates):
        diag = estimate.diagnostics
        row = FrameMetrics(
            frame=diag.frame_a,
            sampson=_finite(diag.sampson),
            sampson_before=_finite(diag.sampson_before),
            sampson_after=_finite(diag.sampson_after),
            fallback=diag.fallback,
        )
        if truth_relatives is not None:
            errors = relative_metrics(estimate.pose, truth_relatives[k])
            row.rre_deg, row.rte_m, row.rte_angle_deg = errors.rre, errors.rte, errors.rte_angle
        if cumulative is not None:
            row.cum_ate_m = float(cumulative[k + 1])
        rows.append(row)

    scale_free = any(e.pose.scale_free for e in result.estimates)
    return MetricsReport(
        frames=len(estimated),
        pairs=len(rows),
        fallbacks=len(result.failures),
        alignment=alignment,
        scale_mode="scale-free" if scale_free else "stereo",
        rre=_mean([r.rre_deg for r in rows]),
        rte=_mean([r.rte_m for r in rows]),
        rte_angle=_mean([r.rte_angle_deg for r in rows]),
        sampson=_mean([r.sampson for r in rows]),
        sampson_before=_mean([r.sampson_before for r in rows]),
        sampson_after=_mean([r.sampson_after for r in rows]),
        ate=absolute.ate if absolute else None,
        ape=absolute.ape if absolute else None,
        ape_r=absolute.ape_r if absolute else None,
        aggregation_loss=_mean([_finite(v) for v in aggregation_losses or []]),
        per_frame=rows,
    )


def trajectory_report(
    estimated: Trajectory,
    truth: Trajectory,
    *,
    alignment: AlignmentMode = "rigid",
    scale_mode: str = "stereo",
) -> MetricsReport:
    """Metrics of a stored trajectory against ground truth, without pair diagnostics.

    Both trajectories are anchored at their first pose; relative errors compare
    consecutive point-transfer poses.
    """
    estimated, truth = estimated.anchored(), truth.anchored()
    absolute = absolute_metrics(estimated, truth, alignment)
    cumulative = absolute.cumulative_ate()
    truth_relatives = [m.inverse() for m in truth.relatives()]
    rows = []
    for k, motion in enumerate(estimated.relatives()):
        errors = relative_metrics(motion.inverse(), truth_relatives[k])
        rows.append(
            FrameMetrics(
                frame=k,
                rre_deg=errors.rre,
                rte_m=errors.rte,
                rte_angle_deg=errors.rte_angle,
                cum_ate_m=float(cumulative[k + 1]),
            )
        )
    return MetricsReport(
        frames=len(estimated),
        pairs=len(rows),
        alignment=alignment,
        scale_mode=scale_mode,
        rre=_mean([r.rre_deg for r in rows]),
        rte=_mean([r.rte_m for r in rows]),
        rte_angle=_mean([r.rte_angle_deg for r in rows]),
        ate=absolute.ate,
        ape=absolute.ape,
        ape_r=absolute.ape_r,
        per_frame=rows,
    )


def _format(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return f"{value:.12g}"
    return str(value)


def write_summary(report: MetricsReport, path: Path) -> Path:
    items = report.summary_items()
    lines = [f"{key} = {_format(items[key]) or 'n/a'}" for key in sorted(items)]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def write_metrics_json(report: MetricsReport, path: Path) -> Path:
    payload = json.dumps(report.model_dump(), indent=2, sort_keys=True)
    path.write_text(payload + "\n", encoding="utf-8")
    return path


def write_per_frame_csv(report: MetricsReport, path: Path) -> Path:
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(PER_FRAME_COLUMNS)
        for row in report.per_frame:
            data = row.model_dump()
            writer.writerow([_format(data[column]) for column in PER_FRAME_COLUMNS])
    return path


def config_hash(config: dict[str, Any]) -> str:
    """SHA-256 of the canonical (sorted, compact) JSON form."""
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def write_manifest(
    path: Path,
    config: dict[str, Any],
    seeds: dict[str, int],
    outputs: Sequence[Path],
) -> Path:
    manifest = {
        "config_sha256": config_hash(config),
        "seeds": dict(sorted(seeds.items())),
        "outputs": sorted(p.name for p in outputs),
        "version": __version__,
    }
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def write_report(report: MetricsReport, output_dir: Path) -> list[Path]:
    output_dir.mkdir(parents=True, exist_ok=True)
    written = [
        write_summary(report, output_dir / "summary.txt"),
        write_metrics_json(report, output_dir / "metrics.json"),
        write_per_frame_csv(report, output_dir / "per_frame.csv"),
    ]
    logger.info(f"Report written to {output_dir}")
    return written
