"""
Exception hierarchy with CLI exit codes.

Every error raised by the package derives from ``EpivoError``. The CLI maps
``exit_code`` straight to the process status: 1 data, 2 config, 3 pipeline.
"""

from __future__ import annotations

from typing import Optional, Sequence


class EpivoError(Exception):
    """Base class for all package errors."""

    exit_code: int = 3


# --- data (exit 1) ---------------------------------------------------------


class DataError(EpivoError):
    """Input files are unreadable or malformed."""

    exit_code = 1


class ParseError(DataError):
    """A text record failed to parse; carries the file and 1-based line number."""

    def __init__(self, path: str, line_number: int, message: str):
        self.path = str(path)
        self.line_number = line_number
        self.message = message
        super().__init__(f"{self.path}:{line_number}: {message}")


class PoseDataError(DataError):
    """A pose record is numerically invalid (e.g. rotation far from orthonormal)."""


# --- config (exit 2) -------------------------------------------------------


class ConfigError(EpivoError, ValueError):
    """Configuration is invalid or refers to missing inputs."""

    exit_code = 2


class MissingStageInputError(ConfigError):
    """A stage loss was requested without the inputs it needs."""


# --- pipeline (exit 3) -----------------------------------------------------


class PipelineError(EpivoError):
    """A numerical stage failed."""

    exit_code = 3


class GeometryError(PipelineError, ValueError):
    """Invalid geometric input."""


class DegenerateTranslationError(GeometryError):
    pass


class CalibrationError(GeometryError):
    pass


class DegenerateLineError(GeometryError):
    pass


class InvalidRotationError(GeometryError):
    pass


class NoValidMatchError(PipelineError):
    pass


class DegenerateConfigurationError(PipelineError):
    """Point configuration does not determine a unique essential matrix."""


class NonDifferentiablePointError(PipelineError):
    """Smallest eigenvalue is repeated; the eigenvector gradient is undefined."""


class RobustFailureError(PipelineError):
    pass


class NoValidPoseError(PipelineError):
    pass


class ScaleRecoveryError(PipelineError):
    pass


class DegenerateGraphError(PipelineError):
    pass


class SceneGenerationError(PipelineError):
    pass


class TrainingDivergedError(PipelineError):
    """Loss became non-finite; the trace up to the failure is kept."""

    def __init__(self, message: str, trace: Sequence[float]):
        self.trace = list(trace)
        super().__init__(message)


class StageError(PipelineError):
    """Wraps a failure with the pipeline stage (and frame pair) it happened in."""

    def __init__(self, stage: str, cause: Exception, frame: Optional[int] = None):
        self.stage = stage
        self.cause = cause
        self.frame = frame
        self.exit_code = getattr(cause, "exit_code", PipelineError.exit_code)
        where = f"stage '{stage}'" if frame is None else f"stage '{stage}' (frame {frame})"
        super().__init__(f"{where}: {cause}")

    def at_frame(self, frame: int) -> "StageError":
        return StageError(self.stage, self.cause, frame=frame)
