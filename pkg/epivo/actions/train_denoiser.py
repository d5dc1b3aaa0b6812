"""
Denoiser training on a sequence directory - weights file plus loss trace
"""

import csv
from pathlib import Path
from typing import Optional, Sequence

from epivo.actions.common import finish_outputs, seeds_of
from epivo.core.config_loader import noise_schedule, require_dataset, training_config
from epivo.core.errors import DataError, TrainingDivergedError
from epivo.core.logger import logger
from epivo.core.schemas import RunConfig
from epivo.datasets.fixture import labeled_pairs, load_fixture
from epivo.diffusion.network import save_denoiser
from epivo.diffusion.training import train_denoiser

WEIGHTS_FILE = "denoiser.weights"
TRACE_FILE = "loss_trace.csv"


def write_loss_trace(
    path: Path, f2: Sequence[float], ddpm: Optional[Sequence[float]] = None
) -> Path:
    """``epoch,f2,ddpm`` rows; ddpm is left blank where it was not recorded."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["epoch", "f2", "ddpm"])
        for k, value in enumerate(f2):
            term = ddpm[k] if ddpm is not None and k < len(ddpm) else None
            writer.writerow([k + 1, f"{value:.12g}", "" if term is None else f"{term:.12g}"])
    return path


def run_train_action(config: RunConfig, output_dir: Path) -> list[Path]:
    """
    Train the refinement denoiser on every supervised pair of the configured dataset

    Raises:
        ConfigError: If the dataset path is missing
        DataError: If no pair carries the depths needed for supervision
        TrainingDivergedError: If the loss becomes non-finite (trace is written first)
    """
    fixture = load_fixture(require_dataset(config), config.dataset.pose_format)
    dataset = labeled_pairs(fixture)
    if not dataset:
        raise DataError(f"{fixture.root}: no pair has depths for denoiser supervision")

    output_dir = Path(output_dir)
    try:
        result = train_denoiser(dataset, noise_schedule(config), training_config(config))
    except TrainingDivergedError as e:
        trace = write_loss_trace(output_dir / TRACE_FILE, e.trace)
        logger.error(f"{e}; partial loss trace in {trace}")
        raise

    written = [
        save_denoiser(result.denoiser, output_dir / WEIGHTS_FILE),
        write_loss_trace(output_dir / TRACE_FILE, result.loss_trace, result.ddpm_trace),
    ]
    return finish_outputs(output_dir, config, written, seeds_of(config, training=config.seed))
