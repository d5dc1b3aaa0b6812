"""
Visual odometry over a sequence directory - reports, trajectory, plots
"""

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from epivo.actions.common import finish_outputs, resolve_alignment, resolve_workers
from epivo.core.config_loader import (
    loss_weights,
    noise_schedule,
    pipeline_config,
    require_dataset,
)
from epivo.core.env_validator import Settings
from epivo.core.errors import ConfigError, DataError
from epivo.core.logger import logger
from epivo.core.schemas import RunConfig
from epivo.datasets.dumps import write_graph, write_hypotheses
from epivo.datasets.fixture import Fixture, FixturePair, load_fixture, pair_stem
from epivo.datasets.poses import write_poses
from epivo.diffusion.denoisers import geometric_oracle_denoiser
from epivo.diffusion.network import load_denoiser
from epivo.geometry.epipolar import fundamental_from_essential
from epivo.geometry.rotation import rotation_to_quaternion
from epivo.geometry.types import CameraModel
from epivo.matching.types import correspondence_arrays
from epivo.pipeline.estimator import (
    DenoiserFactory,
    Frame,
    PairEstimate,
    PairTask,
    SequenceResult,
    estimate_sequence,
    pair_indices,
)
from epivo.pipeline.losses import LossWeights, StageInputs, stage_losses
from epivo.pipeline.plots import write_plots
from epivo.pipeline.report import MetricsReport, build_report, write_report
from epivo.pipeline.trajectory import Trajectory, chain
from epivo.simulation.scene import disparity_from_depth


@dataclass(frozen=True, eq=False)
class PipelineRun:
    result: SequenceResult
    estimated: Trajectory
    truth: Trajectory
    report: MetricsReport


def select_pairs(fixture: Fixture, stride: int) -> list[FixturePair]:
    """The fixture pairs (k, k + stride), which must chain frame to frame."""
    available = {(p.frame_a, p.frame_b): p for p in fixture.pairs}
    wanted = pair_indices(fixture.n_frames, stride)
    missing = [pair for pair in wanted if pair not in available]
    if missing:
        raise DataError(
            f"{fixture.root}: no correspondences for {len(missing)} pair(s) at stride {stride}, "
            f"first {missing[0]}"
        )
    if not wanted:
        raise DataError(
            f"{fixture.root}: {fixture.n_frames} frame(s) give no pair at stride {stride}"
        )
    return [available[pair] for pair in wanted]


def lift_values(fixture: Fixture, pair: FixturePair, config: RunConfig) -> Optional[np.ndarray]:
    """Per-row depth or disparity for the first view, or None when the sequence is monocular.

    Rows follow the correspondences, or the first descriptor set when re-matching.
    """
    if config.pipeline.lift_mode == "depth":
        return pair.depths
    if pair.disparities is not None:
        return pair.disparities
    grid = fixture.frame_grid(pair.frame_a)
    if grid is not None:
        if config.pipeline.matching == "descriptors" and pair.descriptors_a is not None:
            return grid.sample(pair.descriptors_a.locations)
        x1, _ = correspondence_arrays(pair.correspondences)
        return grid.sample(x1)
    if pair.depths is not None:
        return disparity_from_depth(pair.depths, fixture.cam)
    return None


def build_tasks(fixture: Fixture, pairs: list[FixturePair], config: RunConfig) -> list[PairTask]:
    tasks = []
    for pair in pairs:
        values = lift_values(fixture, pair, config)
        reference = fixture.true_relative(pair.frame_a, pair.frame_b)
        if config.pipeline.matching == "descriptors":
            if pair.descriptors_a is None or pair.descriptors_b is None:
                raise DataError(
                    f"Pair {pair_stem(pair.frame_a, pair.frame_b)} has no descriptor files"
                )
            tasks.append(
                PairTask(
                    Frame(pair.frame_a, pair.descriptors_a, values),
                    Frame(pair.frame_b, pair.descriptors_b),
                    reference=reference,
                )
            )
        else:
            tasks.append(
                PairTask(
                    Frame(pair.frame_a),
                    Frame(pair.frame_b),
                    correspondences=pair.correspondences,
                    depths=values,
                    reference=reference,
                )
            )
    return tasks


def denoiser_factory(
    config: RunConfig, fixture: Fixture, settings: Settings
) -> Optional[DenoiserFactory]:
    if not config.pipeline.refinement:
        return None
    if config.pipeline.denoiser == "oracle":
        logger.info("Refinement uses the geometric oracle (ground-truth poses)")
        return lambda a, b: geometric_oracle_denoiser(fixture.true_relative(a, b), fixture.cam)
    path = config.pipeline.denoiser_path or settings.EPIVO_DENOISER_PATH
    if not path:
        raise ConfigError("A trained denoiser needs pipeline.denoiser_path or EPIVO_DENOISER_PATH")
    if not Path(path).is_file():
        raise ConfigError(f"Denoiser weights not found: {path}")
    model = load_denoiser(Path(path))
    return lambda a, b: model


def aggregation_loss(
    estimate: PairEstimate, cam: CameraModel, weights: LossWeights
) -> Optional[float]:
    """Weighted aggregation-stage objective of the chosen hypothesis on its graph."""
    if estimate.graph is None or estimate.hypothesis is None:
        return None
    x1, x2 = correspondence_arrays(estimate.graph.correspondences)
    e = estimate.hypothesis.e
    inputs = StageInputs(
        x1=x1,
        x2=x2,
        matrix=fundamental_from_essential(e, cam).matrix,
        hypothesis=e.matrix,
        weights=estimate.graph.weights,
        cam=cam,
    )
    return stage_losses("F3", inputs, weights).total


def execute_pipeline(config: RunConfig, fixture: Fixture, settings: Settings) -> PipelineRun:
    """Estimate, chain and evaluate every selected pair; writes nothing."""
    pairs = select_pairs(fixture, config.pipeline.stride)
    schedule = noise_schedule(config) if config.pipeline.denoiser == "oracle" else None
    result = estimate_sequence(
        build_tasks(fixture, pairs, config),
        pipeline_config(config, schedule),
        cam=fixture.cam,
        denoiser_for=denoiser_factory(config, fixture, settings),
        workers=resolve_workers(config, settings),
    )
    estimated = chain(result.camera_motions())
    frames = [pairs[0].frame_a] + [p.frame_b for p in pairs]
    truth = Trajectory([fixture.trajectory.poses[k] for k in frames]).anchored()
    scale_free = any(e.pose.scale_free for e in result.estimates)
    weights = loss_weights(config)
    report = build_report(
        result,
        estimated,
        truth=truth,
        truth_relatives=[fixture.true_relative(p.frame_a, p.frame_b) for p in pairs],
        alignment=resolve_alignment(config, scale_free),
        aggregation_losses=[aggregation_loss(e, fixture.cam, weights) for e in result.estimates],
    )
    logger.info(
        f"ATE {report.ate:.4g} m, APE {report.ape:.4g} m over {report.frames} frame(s) "
        f"({report.alignment} alignment)"
    )
    return PipelineRun(result=result, estimated=estimated, truth=truth, report=report)


def write_trajectory_csv(path: Path, trajectory: Trajectory, fallbacks: list[bool]) -> Path:
    """One row per pose: position, scalar-last quaternion, and whether the step was a fallback."""
    flags = [False, *fallbacks]
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["frame", "tx", "ty", "tz", "qx", "qy", "qz", "qw", "fallback"])
        for k, pose in enumerate(trajectory.poses):
            values = [*pose.t, *rotation_to_quaternion(pose.rotation)]
            writer.writerow([k, *(f"{v:.17g}" for v in values), str(flags[k]).lower()])
    return path


def write_dumps(output_dir: Path, result: SequenceResult) -> list[Path]:
    written = []
    for estimate in result.estimates:
        stem = pair_stem(estimate.diagnostics.frame_a, estimate.diagnostics.frame_b)
        if estimate.candidates:
            path = output_dir / "dumps" / f"{stem}.hyp"
            written.append(write_hypotheses(path, estimate.candidates))
        if estimate.graph is not None:
            written.append(write_graph(output_dir / "dumps" / f"{stem}.graph", estimate.graph))
    return written


def run_pipeline_action(config: RunConfig, output_dir: Path, settings: Settings) -> list[Path]:
    """
    Run the pipeline over the configured sequence and write every output

    Args:
        config: Validated run configuration
        output_dir: Directory for reports, trajectory files and plots
        settings: Process settings (workers, denoiser path)

    Returns:
        Paths of every file written, manifest last

    Raises:
        ConfigError: If the dataset path is missing (before anything is written)
        DataError: If sequence files are malformed
        StageError: If a pair fails in a way the fallback cannot absorb
    """
    fixture = load_fixture(require_dataset(config), config.dataset.pose_format)
    run = execute_pipeline(config, fixture, settings)

    output_dir = Path(output_dir)
    written = write_report(run.report, output_dir)
    written.append(write_poses(output_dir / "trajectory.txt", run.estimated))
    written.append(
        write_trajectory_csv(
            output_dir / "trajectory.csv", run.estimated, run.result.fallback_flags
        )
    )
    if config.plots.enabled:
        written += write_plots(
            config.plots.kinds, output_dir, run.estimated, truth=run.truth, report=run.report
        )
    if config.dump_intermediates:
        written += write_dumps(output_dir, run.result)
    return finish_outputs(output_dir, config, written)
