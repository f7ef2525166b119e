from __future__ import annotations

"""
Typed runtime settings loaded from an optional `.env` file with overrides from
real environment variables. Uses pydantic-settings.

Precedence (left < right):
  defaults  <  .env (if present)  <  real environment variables

Usage:
    from bionic.settings import settings
    workers = settings.threads

Environment:
- ENV_FILE points at an alternate .env path (defaults to ".env").
- BIONIC_THREADS caps the number of cross-validation folds fitted in parallel.
- BIONIC_PROGRESS_EVERY sets the sweep cadence of inference progress lines.
- BIONIC_JITTER_START / BIONIC_JITTER_MAX bound the diagonal jitter added when a
  posterior precision fails its Cholesky factorization.

Model hyperparameters are NOT read from the environment; they live in the
experiment config (see bionic.schema).
"""

import os
from pathlib import Path

from pydantic import Field, PositiveFloat, PositiveInt, ValidationError
from pydantic.functional_validators import model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    threads: PositiveInt = Field(1, alias="BIONIC_THREADS")
    progress_every: PositiveInt = Field(10, alias="BIONIC_PROGRESS_EVERY")
    jitter_start: PositiveFloat = Field(1e-10, alias="BIONIC_JITTER_START")
    jitter_max: PositiveFloat = Field(1e-6, alias="BIONIC_JITTER_MAX")

    model_config = SettingsConfigDict(
        extra="ignore",
        case_sensitive=False,
        env_prefix="",
    )

    @model_validator(mode="after")
    def _check_jitter(self) -> "Settings":
        if self.jitter_max < self.jitter_start:
            raise ValueError("BIONIC_JITTER_MAX must be >= BIONIC_JITTER_START")
        return self


def load_settings() -> Settings:
    """
    Create a Settings instance, honoring ENV_FILE if set.

      ENV_FILE=.env.test python -m bionic.main cv --config c.json
    """
    env_file = os.environ.get("ENV_FILE", ".env")
    env_path = Path(env_file)
    try:
        return Settings(_env_file=env_path if env_path.exists() else None)
    except ValidationError as e:
        bad = sorted({str((err.get("loc") or ("settings",))[0]) for err in e.errors()})
        raise RuntimeError(
            "Invalid settings: "
            + ", ".join(bad)
            + f". Looked in ENV_FILE={env_file!r} and process environment."
        ) from e


# Singleton used across modules
settings: Settings = load_settings()

__all__ = [
    "Settings",
    "settings",
    "load_settings",
]
