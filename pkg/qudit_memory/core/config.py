import logging
import os
from typing import Optional

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

logger = logging.getLogger(__name__)

try:
    import psutil
    PSUTIL_AVAILABLE = True
except ImportError:
    PSUTIL_AVAILABLE = False
    logger.warning("psutil not available. Falling back to os.cpu_count for worker sizing.")


class Settings(BaseSettings):
    """Process-level settings.

    Physics constants do not live here; they come from the experiment config file.
    """

    model_config = SettingsConfigDict(
        env_file=".env",
        env_prefix="QUDIT_",
        case_sensitive=True,
        extra="ignore",
        validate_assignment=True,
    )

    PROJECT_NAME: str = "qudit-memory"

    # Logging
    LOG_LEVEL: str = Field("INFO", description="Root level for the qudit_memory logger")
    LOG_JSON: bool = Field(True, description="Emit JSON log lines instead of plain text")

    # Runs
    DEFAULT_CONFIG_PATH: str = Field("config/experiment_defaults.json")
    OUTPUT_DIR: str = Field("results")
    DEFAULT_SHOTS: int = Field(4096, description="Ensemble size for imperfect-pulse averages")
    DEFAULT_JOBS: int = Field(0, description="Worker processes; 0 means available parallelism")
    SHOW_PROGRESS: bool = Field(True)

    # Fitting
    FIT_MAX_ITERATIONS: int = Field(200)
    FIT_XTOL: float = Field(1e-10)

    @field_validator("LOG_LEVEL")
    @classmethod
    def validate_log_level(cls, v: str) -> str:
        v = v.upper()
        if v not in {"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}:
            raise ValueError(f"Unknown log level {v}")
        return v

    @field_validator("DEFAULT_SHOTS", "FIT_MAX_ITERATIONS")
    @classmethod
    def validate_positive(cls, v: int) -> int:
        if v < 1:
            raise ValueError("must be at least 1")
        return v

    @field_validator("DEFAULT_JOBS")
    @classmethod
    def validate_jobs(cls, v: int) -> int:
        if v < 0:
            raise ValueError("must be 0 (auto) or positive")
        return v

    @field_validator("FIT_XTOL")
    @classmethod
    def validate_xtol(cls, v: float) -> float:
        if v <= 0:
            raise ValueError("must be positive")
        return v


def resolve_jobs(requested: Optional[int] = None) -> int:
    """Number of worker processes for a sweep."""
    jobs = settings.DEFAULT_JOBS if requested is None else requested
    if jobs >= 1:
        return jobs
    if PSUTIL_AVAILABLE:
        count = psutil.cpu_count(logical=True)
        if count:
            return count
    return os.cpu_count() or 1


settings = Settings()
