"""Helpers shared by the command actions: output directories, workers, manifests."""

from pathlib import Path
from typing import Any, Optional, Sequence

from epivo.core.env_validator import Settings
from epivo.core.schemas import RunConfig
from epivo.pipeline.metrics import AlignmentMode
from epivo.pipeline.report import write_manifest


def resolve_output_dir(config: RunConfig, settings: Settings, verb: str) -> Path:
    """``output_dir`` from the config, else ``$EPIVO_OUTPUT_ROOT/<verb>``."""
    if config.output_dir:
        return Path(config.output_dir)
    return Path(settings.EPIVO_OUTPUT_ROOT) / verb


def resolve_workers(config: RunConfig, settings: Settings) -> int:
    return config.pipeline.workers or settings.EPIVO_WORKERS


def resolve_alignment(config: RunConfig, scale_free: bool) -> AlignmentMode:
    """``auto`` is rigid for metric trajectories and similarity for scale-free ones."""
    mode = config.evaluation.alignment
    if mode == "auto":
        return "similarity" if scale_free else "rigid"
    return mode


def config_payload(config: RunConfig) -> dict[str, Any]:
    return config.model_dump(mode="json")


def seeds_of(config: RunConfig, **extra: int) -> dict[str, int]:
    return {"seed": config.seed, **extra}


def finish_outputs(
    output_dir: Path,
    config: RunConfig,
    written: Sequence[Path],
    seeds: Optional[dict[str, int]] = None,
) -> list[Path]:
    """Append ``manifest.json`` (config hash, seeds, output names) to the written files."""
    manifest = write_manifest(
        Path(output_dir) / "manifest.json",
        config_payload(config),
        seeds or seeds_of(config),
        written,
    )
    return [*written, manifest]
