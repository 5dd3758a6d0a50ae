"""Process-wide settings."""

import os

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict

from peftt.utilities.logging import LogLevel


class Settings(BaseSettings):
    """peftt settings.

    All settings can be configured via environment variables with the prefix PEFTT_.
    For example, PEFTT_THREADS=2 caps sweep parallelism at two worker processes.
    """

    model_config = SettingsConfigDict(
        env_prefix="PEFTT_",
        env_file=".env",
        extra="ignore",
    )

    threads: int = Field(default_factory=lambda: os.cpu_count() or 1, ge=1)
    """Upper bound on worker processes used by `--repeats`."""

    log_level: LogLevel = "INFO"

    default_max_len: int = Field(default=108, ge=1)
    """Sequence length used when neither a flag nor a config file sets one."""
