"""
Trajectory and refinement plots as SVG.

The SVG backend gets a fixed hash salt and no date metadata, so a plot is a
pure function of its inputs.
"""

from __future__ import annotations

from pathlib import Path
from typing import Literal, Optional, Sequence

import matplotlib

matplotlib.use("Agg")

from matplotlib import pyplot as plt  # noqa: E402

from epivo.core.errors import ConfigError  # noqa: E402
from epivo.core.logger import logger  # noqa: E402
from epivo.pipeline.report import MetricsReport  # noqa: E402
from epivo.pipeline.trajectory import Trajectory  # noqa: E402

PlotKind = Literal["xz", "trajectory3d", "sampson"]
PLOT_KINDS: tuple[str, ...] = ("xz", "trajectory3d", "sampson")

SVG_HASH_SALT = "epivo"


def _save(fig, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with plt.rc_context({"svg.hashsalt": SVG_HASH_SALT, "svg.fonttype": "none"}):
        fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    logger.debug(f"Plot written to {path}")
    return path


def plot_xz(estimated: Trajectory, path: Path, truth: Optional[Trajectory] = None) -> Path:
    """Top-down X-Z view: x to the right, z (forward) up."""
    fig, ax = plt.subplots(figsize=(6, 6))
    if truth is not None:
        gt = truth.positions()
        ax.plot(gt[:, 0], gt[:, 2], color="k", label="Ground truth")
    est = estimated.positions()
    ax.plot(est[:, 0], est[:, 2], color="r", label="Estimated")
    ax.set_xlabel("x (m)")
    ax.set_ylabel("z (m)")
    ax.axis("equal")
    ax.legend()
    return _save(fig, path)


def plot_trajectory3d(
    estimated: Trajectory, path: Path, truth: Optional[Trajectory] = None
) -> Path:
    fig = plt.figure(figsize=(6, 6))
    ax = fig.add_subplot(projection="3d")
    if truth is not None:
        gt = truth.positions()
        ax.plot(gt[:, 0], gt[:, 1], gt[:, 2], color="k", label="Ground truth")
    est = estimated.positions()
    ax.plot(est[:, 0], est[:, 1], est[:, 2], color="r", label="Estimated")
    ax.set_xlabel("x (m)")
    ax.set_ylabel("y (m)")
    ax.set_zlabel("z (m)")
    ax.legend()
    return _save(fig, path)


def plot_sampson(report: MetricsReport, path: Path) -> Path:
    """Per-pair mean Sampson distance before and after refinement."""
    frames = [row.frame for row in report.per_frame]
    before = [row.sampson_before for row in report.per_frame]
    after = [row.sampson_after for row in report.per_frame]
    fig, ax = plt.subplots(figsize=(8, 4))
    ax.plot(frames, [float("nan") if v is None else v for v in before], label="Before refinement")
    ax.plot(frames, [float("nan") if v is None else v for v in after], label="After refinement")
    ax.set_xlabel("Frame #")
    ax.set_ylabel("Sampson distance")
    ax.set_yscale("log")
    ax.legend()
    return _save(fig, path)


def write_plots(
    kinds: Sequence[str],
    output_dir: Path,
    estimated: Trajectory,
    *,
    truth: Optional[Trajectory] = None,
    report: Optional[MetricsReport] = None,
) -> list[Path]:
    """Render each requested kind into ``output_dir`` as ``<kind>.svg``."""
    unknown = [k for k in kinds if k not in PLOT_KINDS]
    if unknown:
        raise ConfigError(f"Unknown plot kind(s) {unknown}, expected {PLOT_KINDS}")
    output_dir = Path(output_dir)
    written = []
    for kind in kinds:
        path = output_dir / f"{kind}.svg"
        if kind == "xz":
            written.append(plot_xz(estimated, path, truth))
        elif kind == "trajectory3d":
            written.append(plot_trajectory3d(estimated, path, truth))
        elif report is not None:
            written.append(plot_sampson(report, path))
        else:
            logger.warning("Sampson plot skipped: no metrics report")
    return written
