"""Diffusion refinement of matched keypoints."""

from epivo.diffusion.denoisers import (
    GeometricOracleDenoiser,
    TargetDenoiser,
    geometric_oracle_denoiser,
)
from epivo.diffusion.network import MLPDenoiser, load_denoiser, save_denoiser
from epivo.diffusion.process import (
    CoordinateFrame,
    Denoiser,
    DenoiserContext,
    KeypointState,
    forward_diffuse,
    make_context,
    predicted_clean,
    refine,
    reverse_step,
)
from epivo.diffusion.schedule import NoiseSchedule
from epivo.diffusion.training import (
    RefinementLossWeights,
    TrainingConfig,
    TrainingResult,
    train_denoiser,
)

__all__ = [
    "CoordinateFrame",
    "Denoiser",
    "DenoiserContext",
    "GeometricOracleDenoiser",
    "KeypointState",
    "MLPDenoiser",
    "NoiseSchedule",
    "RefinementLossWeights",
    "TargetDenoiser",
    "TrainingConfig",
    "TrainingResult",
    "forward_diffuse",
    "geometric_oracle_denoiser",
    "load_denoiser",
    "make_context",
    "predicted_clean",
    "refine",
    "reverse_step",
    "save_denoiser",
    "train_denoiser",
]
