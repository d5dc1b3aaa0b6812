"""
Environment variable validation using Pydantic
"""

from typing import Optional

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


class Settings(BaseSettings):
    """
    Process-level settings

    Automatically loads from .env file if present
    """

    EPIVO_LOG_LEVEL: str = Field("INFO", description="Package log level")
    EPIVO_OUTPUT_ROOT: str = Field(
        "outputs", description="Output directory used when the run config sets none"
    )
    EPIVO_WORKERS: int = Field(1, ge=1, description="Thread pool size for pair estimation")
    EPIVO_DENOISER_PATH: Optional[str] = Field(
        None, description="Trained denoiser weights used when the run config names none"
    )

    model_config = {
        "env_file": ".env",
        "env_file_encoding": "utf-8",
        "case_sensitive": True,
        "extra": "ignore",  # Ignore extra environment variables
    }

    @field_validator("EPIVO_LOG_LEVEL")
    @classmethod
    def validate_log_level(cls, v: str) -> str:
        level = v.strip().upper()
        if level not in LOG_LEVELS:
            raise ValueError(f"EPIVO_LOG_LEVEL must be one of {', '.join(LOG_LEVELS)}, got '{v}'")
        return level


def load_and_validate_settings() -> Settings:
    """
    Load and validate settings from environment

    Returns:
        Validated Settings instance

    Raises:
        ValidationError: If a setting is invalid
    """
    return Settings()
