"""
Pydantic schemas for configuration validation
"""

from typing import Any, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, PositiveInt, field_validator, model_validator

from epivo.settings import diffusion_defaults, graph_defaults, matcher_defaults, solver_defaults


class StrictModel(BaseModel):
    """Base for every config section: unknown keys are rejected."""

    model_config = ConfigDict(extra="forbid")


class CameraSchema(StrictModel):
    """Pinhole stereo camera (camera.json)"""

    fx: float = Field(..., gt=0)
    fy: float = Field(..., gt=0)
    cx: float
    cy: float
    baseline: float = Field(..., gt=0, description="Stereo baseline in meters")
    k1: float = 0.0
    k2: float = 0.0
    width: int = Field(default=640, gt=0)
    height: int = Field(default=480, gt=0)


class SceneSchema(StrictModel):
    """Synthetic scene generation"""

    n_frames: int = Field(default=50, ge=2)
    points_per_frame: int = Field(default=120, ge=8)
    depth_min: float = Field(default=4.0, gt=0)
    depth_max: float = Field(default=40.0, gt=0)
    step: List[float] = Field(default_factory=lambda: [0.0, 0.0, 1.0], min_length=3, max_length=3)
    yaw_step_max: float = Field(default=0.02, ge=0)
    translation_jitter: float = Field(default=0.05, ge=0)
    rotation_jitter: float = Field(default=0.005, ge=0)
    descriptor_dim: int = Field(default=128, ge=1)
    descriptor_noise_max: float = Field(default=0.1, ge=0)
    camera: CameraSchema = Field(
        default_factory=lambda: CameraSchema(fx=500.0, fy=500.0, cx=320.0, cy=240.0, baseline=0.5)
    )

    @model_validator(mode="after")
    def validate_depth_range(self) -> "SceneSchema":
        """Depth range must be increasing"""
        if self.depth_min >= self.depth_max:
            raise ValueError(f"depth_min ({self.depth_min}) must be < depth_max ({self.depth_max})")
        return self


class NoiseSchema(StrictModel):
    """Correspondence and pose noise"""

    sigma_p: float = Field(default=0.0, ge=0, description="Projection noise std, px")
    delta_theta_max: float = Field(default=0.0, ge=0, description="Pose rotation bound, rad")
    delta_t_max: float = Field(default=0.0, ge=0, description="Pose translation bound, m")
    alpha: float = Field(default=0.0, ge=0, description="Matching variance slope, px²")
    beta: float = Field(default=0.0, ge=0, description="Matching variance floor, px²")
    k1_err: float = 0.0
    k2_err: float = 0.0


class ScheduleSchema(StrictModel):
    """Linear DDPM noise schedule"""

    steps: int = Field(default=diffusion_defaults.STEPS, ge=1)
    beta_start: float = Field(default=diffusion_defaults.BETA_START, gt=0, lt=1)
    beta_end: float = Field(default=diffusion_defaults.BETA_END, gt=0, lt=1)

    @model_validator(mode="after")
    def validate_order(self) -> "ScheduleSchema":
        if self.beta_start > self.beta_end:
            raise ValueError("beta_start must not exceed beta_end")
        return self


class RansacSchema(StrictModel):
    iterations: int = Field(default=solver_defaults.RANSAC_ITERATIONS, ge=1)
    inlier_threshold: float = Field(default=solver_defaults.RANSAC_THRESHOLD, gt=0)
    sample_size: Literal[5, 8] = 8
    stop_at_goal: bool = True


class LossWeightsSchema(StrictModel):
    """Stage objective weights (w1, w2, w3)"""

    w1: float = Field(default=1.0, ge=0)
    w2: float = Field(default=1.0, ge=0)
    w3: float = Field(default=1.0, ge=0)

    @model_validator(mode="after")
    def validate_not_all_zero(self) -> "LossWeightsSchema":
        if not any((self.w1, self.w2, self.w3)):
            raise ValueError("Loss weights must not all be zero")
        return self


class MatcherSchema(StrictModel):
    tau: float = Field(default=matcher_defaults.TAU, gt=0, le=1)
    temperature: float = Field(default=0.1, gt=0)
    iterations: int = Field(default=matcher_defaults.SINKHORN_ITERATIONS, ge=1)
    top_k: Optional[int] = Field(default=None, ge=1)
    grid_shape: Optional[Tuple[PositiveInt, PositiveInt]] = Field(
        default=None, description="Feature grid (rows, cols) for top-K positional encodings"
    )


class PipelineSchema(StrictModel):
    """Pair estimation toggles"""

    refinement: bool = False
    solver: Literal["ransac", "weighted-svd", "multi"] = "multi"
    scorer: Literal["residual", "mp"] = "residual"
    init: Literal["ransac", "eight-point"] = "ransac"
    matching: Literal["precomputed", "descriptors"] = Field(
        default="precomputed",
        description="Use the stored correspondences or re-match the stored descriptors",
    )
    denoiser: Literal["oracle", "trained"] = Field(
        default="oracle",
        description="Geometric oracle (needs ground truth) or a trained weight file",
    )
    denoiser_path: Optional[str] = Field(default=None, description="Trained denoiser weights")
    hypotheses: int = Field(default=solver_defaults.HYPOTHESES, ge=1)
    knn_k: int = Field(default=graph_defaults.KNN_K, ge=1)
    pixel_k: Optional[int] = Field(default=None, ge=1)
    lift_mode: Literal["depth", "disparity"] = "depth"
    triangulation: Literal["dlt", "midpoint"] = "dlt"
    recover_scale: bool = True
    min_matches: int = Field(default=solver_defaults.MIN_MATCHES, ge=5)
    refine_start_t: Optional[int] = Field(default=None, ge=0)
    stochastic_refinement: bool = False
    stride: int = Field(default=1, ge=1, description="Frame gap between the two views of a pair")
    workers: Optional[int] = Field(default=None, ge=1, description="Defaults to EPIVO_WORKERS")
    matcher: MatcherSchema = Field(default_factory=MatcherSchema)


class RefinementWeightsSchema(StrictModel):
    sampson: float = Field(default=0.05, ge=0)
    ddpm: float = Field(default=1.0, ge=0)
    reconstruction: float = Field(default=0.1, ge=0)


class TrainingSchema(StrictModel):
    """Denoiser training (refiner stage)"""

    epochs: int = Field(default=150, ge=0)
    learning_rate: float = Field(default=1e-3, gt=0)
    batch_size: int = Field(default=256, ge=1)
    hidden: int = Field(default=diffusion_defaults.HIDDEN_WIDTH, ge=1)
    jitter_std: float = Field(default=0.0, ge=0)
    weights: RefinementWeightsSchema = Field(default_factory=RefinementWeightsSchema)


class EvaluationSchema(StrictModel):
    alignment: Literal["auto", "none", "rigid", "similarity"] = Field(
        default="auto",
        description="ATE alignment; auto = rigid for metric scale, similarity when scale-free",
    )


class DatasetSchema(StrictModel):
    path: Optional[str] = Field(default=None, description="Fixture or dataset directory")
    pose_format: Optional[Literal["kitti", "tartanair"]] = Field(
        default=None, description="Overrides the format recorded in the sequence manifest"
    )


class PlotSchema(StrictModel):
    enabled: bool = True
    kinds: List[Literal["xz", "trajectory3d", "sampson"]] = Field(
        default_factory=lambda: ["xz", "trajectory3d"]
    )


class RunConfig(StrictModel):
    """Schema for run.json / simulate.json"""

    seed: int = Field(default=0, ge=0)
    output_dir: Optional[str] = Field(default=None, description="Defaults to EPIVO_OUTPUT_ROOT")
    dataset: DatasetSchema = Field(default_factory=DatasetSchema)
    scene: SceneSchema = Field(default_factory=SceneSchema)
    noise: NoiseSchema = Field(default_factory=NoiseSchema)
    schedule: ScheduleSchema = Field(default_factory=ScheduleSchema)
    ransac: RansacSchema = Field(default_factory=RansacSchema)
    loss_weights: LossWeightsSchema = Field(default_factory=LossWeightsSchema)
    pipeline: PipelineSchema = Field(default_factory=PipelineSchema)
    training: TrainingSchema = Field(default_factory=TrainingSchema)
    evaluation: EvaluationSchema = Field(default_factory=EvaluationSchema)
    plots: PlotSchema = Field(default_factory=PlotSchema)
    dump_intermediates: bool = Field(
        default=False, description="Write per-pair graph and hypothesis dumps"
    )

    @field_validator("output_dir")
    @classmethod
    def validate_output_dir(cls, v: Optional[str]) -> Optional[str]:
        """Reject blank output paths"""
        if v is not None and not v.strip():
            raise ValueError("output_dir must not be blank")
        return v

    def with_overrides(self, **overrides: Any) -> "RunConfig":
        """Apply CLI overrides (dotted keys such as ``pipeline.solver``) and re-validate."""
        data = self.model_dump()
        for key, value in overrides.items():
            if value is None:
                continue
            *parents, leaf = key.split(".")
            target = data
            for part in parents:
                target = target[part]
            target[leaf] = value
        return validate_run_config(data)


def validate_run_config(config: dict) -> RunConfig:
    """
    Validate run configuration

    Args:
        config: Raw configuration dictionary

    Returns:
        Validated RunConfig instance

    Raises:
        ValidationError: If configuration is invalid or has unknown keys
    """
    return RunConfig.model_validate(config)
