"""
Run configuration loading and conversion into pipeline objects
"""

import json
from pathlib import Path
from typing import Optional

from pydantic import ValidationError

from epivo.core.errors import ConfigError
from epivo.core.logger import logger
from epivo.core.schemas import CameraSchema, RunConfig, validate_run_config
from epivo.diffusion.schedule import NoiseSchedule
from epivo.diffusion.training import RefinementLossWeights, TrainingConfig
from epivo.geometry.types import CameraModel
from epivo.paths import run_config_path
from epivo.pipeline.estimator import MatcherSettings, PipelineConfig
from epivo.pipeline.losses import LossWeights
from epivo.pose.types import RansacConfig
from epivo.simulation.noise import NoiseConfig
from epivo.simulation.scene import SceneConfig


def load_run_config(config_path: Optional[Path] = None, validate: bool = True) -> RunConfig:
    """
    Load a run configuration from JSON

    Args:
        config_path: Path to the config file (defaults to config/run.json)
        validate: Reject unknown keys and out-of-range values

    Returns:
        Validated RunConfig

    Raises:
        ConfigError: If the file is missing, not JSON, or fails validation
    """
    path = Path(config_path) if config_path is not None else run_config_path()
    logger.debug(f"Loading run config from {path}")
    if not path.is_file():
        raise ConfigError(f"Config file not found: {path}")
    try:
        with open(path, encoding="utf-8") as f:
            raw = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON at line {e.lineno}: {e.msg}") from e

    if not validate:
        return RunConfig.model_construct(**raw)
    try:
        config = validate_run_config(raw)
    except ValidationError as e:
        raise ConfigError(f"{path}: {e}") from e
    logger.info(f"Loaded run config {path.name} (seed {config.seed})")
    return config


def require_dataset(config: RunConfig) -> Path:
    """The dataset directory, which must exist before any output is written."""
    if not config.dataset.path:
        raise ConfigError("dataset.path is not set")
    path = Path(config.dataset.path)
    if not path.is_dir():
        raise ConfigError(f"Dataset directory not found: {path}")
    return path


def camera_model(schema: CameraSchema) -> CameraModel:
    return CameraModel(**schema.model_dump())


def scene_config(config: RunConfig) -> SceneConfig:
    scene = config.scene
    data = scene.model_dump(exclude={"camera", "step"})
    return SceneConfig(step=tuple(scene.step), camera=camera_model(scene.camera), **data)


def noise_config(config: RunConfig) -> NoiseConfig:
    return NoiseConfig(**config.noise.model_dump())


def noise_schedule(config: RunConfig) -> NoiseSchedule:
    s = config.schedule
    return NoiseSchedule.linear(s.steps, s.beta_start, s.beta_end)


def loss_weights(config: RunConfig) -> LossWeights:
    return LossWeights(**config.loss_weights.model_dump())


def pipeline_config(config: RunConfig, schedule: Optional[NoiseSchedule] = None) -> PipelineConfig:
    """Build the frozen pipeline config; ``schedule`` overrides the configured one."""
    p = config.pipeline
    return PipelineConfig(
        refinement=p.refinement,
        solver=p.solver,
        scorer=p.scorer,
        init=p.init,
        hypotheses=p.hypotheses,
        knn_k=p.knn_k,
        pixel_k=p.pixel_k,
        lift_mode=p.lift_mode,
        triangulation=p.triangulation,
        recover_scale=p.recover_scale,
        min_matches=p.min_matches,
        ransac=RansacConfig(seed=config.seed, **config.ransac.model_dump()),
        matcher=MatcherSettings(
            **p.matcher.model_dump(exclude={"grid_shape"}),
            grid_shape=tuple(p.matcher.grid_shape) if p.matcher.grid_shape else None,
        ),
        schedule=schedule,
        refine_start_t=p.refine_start_t,
        stochastic_refinement=p.stochastic_refinement,
        seed=config.seed,
    )


def training_config(config: RunConfig) -> TrainingConfig:
    t = config.training
    return TrainingConfig(
        epochs=t.epochs,
        learning_rate=t.learning_rate,
        batch_size=t.batch_size,
        hidden=t.hidden,
        jitter_std=t.jitter_std,
        weights=RefinementLossWeights(**t.weights.model_dump()),
        seed=config.seed,
    )
