"""
Application Configuration

Process-level settings loaded from environment variables. Only the worker
count and verbosity are environment driven; algorithm parameters live in
the pydantic config models and are recorded in every run's metadata.
"""

import logging
from typing import Optional

from pydantic import field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


class Settings(BaseSettings):
    """Settings read from ``POLARSEP_*`` environment variables."""

    model_config = SettingsConfigDict(
        env_prefix="POLARSEP_",
        env_file=".env",
        case_sensitive=True,
        extra="ignore",
    )

    # Batch fan-out
    WORKERS: int = 1

    # Verbosity
    LOG_LEVEL: str = "INFO"

    @field_validator("WORKERS")
    @classmethod
    def _check_workers(cls, value: int) -> int:
        if value < 1:
            raise ValueError("WORKERS must be >= 1")
        return value

    @field_validator("LOG_LEVEL")
    @classmethod
    def _check_level(cls, value: str) -> str:
        level = value.upper()
        if level not in {"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}:
            raise ValueError(f"unknown log level: {value}")
        return level


_settings: Optional[Settings] = None


def get_settings() -> Settings:
    """Get application settings singleton."""
    global _settings
    if _settings is None:
        _settings = Settings()
    return _settings


def reset_settings() -> None:
    """Drop the cached settings so the next call re-reads the environment."""
    global _settings
    _settings = None
