"""
Application configuration using Pydantic settings.
"""

import logging
from functools import lru_cache

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """
    Centralized configuration loaded from environment variables and optional .env file.
    """

    model_config = SettingsConfigDict(env_file=".env", env_file_encoding="utf-8", extra="ignore")

    LOG_LEVEL: str = Field("INFO", description="Python logging level string")

    CHECK_THREADS: int = Field(
        1, ge=1, le=256, description="Worker threads for sampled checks and batch resolvent solves"
    )
    DEFAULT_SEED: int = Field(
        20240101, ge=0, description="Seed used for stochastic clouds that do not declare one"
    )
    TOLERANCE_SCALE: float = Field(
        1.0, gt=0.0, description="Multiplier applied to every numeric tolerance of the checks"
    )
    FD_STEP: float = Field(
        1e-5, gt=0.0, lt=1.0, description="Base finite-difference step, scaled by (1+|x|)"
    )
    OUTPUT_DIR: str = Field("out", description="Directory for reports, traces and solutions")

    MAX_CLOUD_ENLARGEMENTS: int = Field(
        2,
        ge=0,
        le=8,
        description="Enlarge-and-retry budget when a trace optimizer hits the cloud boundary",
    )
    JENSEN_CANDIDATES: int = Field(
        128, ge=1, le=4096, description="Size of the low-discrepancy sweep for Jensen shifts"
    )

    @field_validator("LOG_LEVEL")
    @classmethod
    def _validate_log_level(cls, value: str) -> str:
        if value.upper() not in {"CRITICAL", "ERROR", "WARNING", "INFO", "DEBUG", "NOTSET"}:
            raise ValueError("LOG_LEVEL must be a standard logging level name")
        return value.upper()


@lru_cache
def get_settings() -> Settings:
    """
    Cached settings accessor to avoid re-parsing environment variables.
    """

    return Settings()


def configure_logging(level: str | None = None) -> None:
    """
    Root logging setup shared by every entry point.
    """

    name = (level or get_settings().LOG_LEVEL).upper()
    logging.basicConfig(
        level=getattr(logging, name, logging.INFO),
        format="%(asctime)s [%(levelname)s] %(name)s - %(message)s",
    )
