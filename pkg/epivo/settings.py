"""Numerical tolerances and algorithm defaults (not JSON config files)."""

from dataclasses import dataclass
from typing import Final


@dataclass(frozen=True)
class Tolerances:
    """Geometry tolerances shared by every module"""

    # Rotation validity
    ORTHONORMAL_TOL: Final[float] = 1e-9
    DET_TOL: Final[float] = 1e-9

    # Essential / fundamental rank checks (relative to the largest singular value)
    RANK_TOL: Final[float] = 1e-8
    EQUAL_SINGULAR_TOL: Final[float] = 1e-6

    # Scale-free translations
    UNIT_NORM_TOL: Final[float] = 1e-9

    # Zero translation / zero line normal
    DEGENERATE_EPS: Final[float] = 1e-12

    # Sampson denominators at or below this are flagged as epipole hits
    SAMPSON_DENOM_EPS: Final[float] = 1e-24

    # Pose files: silently project within, warn beyond, reject beyond
    POSE_SILENT_TOL: Final[float] = 1e-6
    POSE_REJECT_TOL: Final[float] = 1e-3

    # Eigengap below which the eigenvector gradient is undefined
    EIGENGAP_TOL: Final[float] = 1e-10

    # Nullspace detection for the 8-point design matrix (relative eigenvalue)
    NULLSPACE_TOL: Final[float] = 1e-10

    # Normalized coordinates beyond this magnitude look like raw pixels
    CONDITIONING_LIMIT: Final[float] = 50.0


@dataclass(frozen=True)
class MatcherDefaults:
    """Sparse matcher defaults"""

    TAU: Final[float] = 0.65
    TEMPERATURE: Final[float] = 1.0
    SINKHORN_ITERATIONS: Final[int] = 50
    DESCRIPTOR_DIM: Final[int] = 256
    TOP_K: Final[int] = 512
    PE_DIM: Final[int] = 16


@dataclass(frozen=True)
class DiffusionDefaults:
    """Noise schedule and denoiser defaults"""

    STEPS: Final[int] = 100
    BETA_START: Final[float] = 1e-4
    BETA_END: Final[float] = 0.02
    HIDDEN_WIDTH: Final[int] = 64
    TIME_EMBED_DIM: Final[int] = 8
    FLOW_SCALE: Final[float] = 20.0
    WEIGHTS_VERSION: Final[str] = "v1"


@dataclass(frozen=True)
class GraphDefaults:
    """Correspondence graph defaults"""

    KNN_K: Final[int] = 4
    MESSAGE_ROUNDS: Final[int] = 2
    # Sampson scale floor for residual weighting (normalized units)
    RESIDUAL_SCALE_FLOOR: Final[float] = 1e-20


@dataclass(frozen=True)
class SolverDefaults:
    """Pose solver defaults"""

    HYPOTHESES: Final[int] = 5
    TEMPERATURE_MIN: Final[float] = 0.5
    TEMPERATURE_MAX: Final[float] = 2.0
    RANSAC_ITERATIONS: Final[int] = 1000
    RANSAC_THRESHOLD: Final[float] = 1e-6
    MIN_MATCHES: Final[int] = 5


@dataclass(frozen=True)
class TrainingDefaults:
    """Denoiser training defaults"""

    REFINER_EPOCHS: Final[int] = 150
    LEARNING_RATE: Final[float] = 1e-3
    BATCH_SIZE: Final[int] = 256


# Singleton instances
tolerances = Tolerances()
matcher_defaults = MatcherDefaults()
diffusion_defaults = DiffusionDefaults()
graph_defaults = GraphDefaults()
solver_defaults = SolverDefaults()
training_defaults = TrainingDefaults()
