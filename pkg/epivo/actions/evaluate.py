"""
Evaluate a stored trajectory, and re-plot stored results
"""

from pathlib import Path
from typing import Optional

from pydantic import ValidationError

from epivo.actions.common import finish_outputs, resolve_alignment
from epivo.core.config_loader import require_dataset
from epivo.core.errors import DataError
from epivo.core.logger import logger
from epivo.core.schemas import RunConfig
from epivo.datasets.fixture import load_fixture
from epivo.datasets.poses import load_poses
from epivo.pipeline.estimator import pair_indices
from epivo.pipeline.plots import write_plots
from epivo.pipeline.report import MetricsReport, trajectory_report, write_report
from epivo.pipeline.trajectory import Trajectory


def sequence_truth(config: RunConfig) -> Trajectory:
    """Ground truth of the configured dataset at the frames a run at this stride estimates."""
    fixture = load_fixture(require_dataset(config), config.dataset.pose_format)
    pairs = pair_indices(fixture.n_frames, config.pipeline.stride)
    frames = [0] + [b for _, b in pairs]
    return Trajectory([fixture.trajectory.poses[k] for k in frames])


def run_evaluate_action(config: RunConfig, trajectory_path: Path, output_dir: Path) -> list[Path]:
    """
    Score a KITTI trajectory file against the dataset ground truth

    Raises:
        ConfigError: If the dataset path is missing
        DataError: If the files are malformed or the pose counts differ
    """
    estimated = load_poses(Path(trajectory_path), "kitti")
    truth = sequence_truth(config)
    if len(estimated) != len(truth):
        raise DataError(
            f"{trajectory_path}: {len(estimated)} pose(s), ground truth at stride "
            f"{config.pipeline.stride} has {len(truth)}"
        )
    # a trajectory file carries no scale flag, so auto means rigid
    report = trajectory_report(estimated, truth, alignment=resolve_alignment(config, False))
    logger.info(f"ATE {report.ate:.4g} m, APE {report.ape:.4g} m over {report.frames} frame(s)")

    output_dir = Path(output_dir)
    written = write_report(report, output_dir)
    if config.plots.enabled:
        written += write_plots(
            config.plots.kinds,
            output_dir,
            estimated.anchored(),
            truth=truth.anchored(),
            report=report,
        )
    return finish_outputs(output_dir, config, written)


def load_metrics(path: Path) -> MetricsReport:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"Metrics file not found: {path}")
    try:
        return MetricsReport.model_validate_json(path.read_text(encoding="utf-8"))
    except ValidationError as e:
        raise DataError(f"{path}: not a metrics report ({e.error_count()} error(s))") from e


def run_plot_action(
    config: RunConfig,
    trajectory_path: Path,
    output_dir: Path,
    kinds: Optional[list[str]] = None,
    metrics_path: Optional[Path] = None,
) -> list[Path]:
    """Render plots of a stored trajectory, with ground truth when a dataset is configured."""
    estimated = load_poses(Path(trajectory_path), "kitti").anchored()
    truth = None
    if config.dataset.path:
        truth = sequence_truth(config).anchored()
        if len(truth) != len(estimated):
            logger.warning(
                f"Ground truth has {len(truth)} pose(s), trajectory {len(estimated)}; plotting both"
            )
    report = load_metrics(metrics_path) if metrics_path is not None else None
    written = write_plots(
        kinds or config.plots.kinds, Path(output_dir), estimated, truth=truth, report=report
    )
    return finish_outputs(output_dir, config, written)
