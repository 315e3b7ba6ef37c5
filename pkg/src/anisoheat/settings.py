"""Process-wide settings read from ANISOHEAT_* environment variables."""

from pydantic import BaseSettings, PositiveInt


class Settings(BaseSettings):
    """Environment configuration of anisoheat."""

    threads: PositiveInt = 1
    """Upper bound on worker threads used for data-parallel evaluation."""

    class Config:
        env_prefix = "ANISOHEAT_"


def get_settings() -> Settings:
    """Read the settings from the current environment."""
    return Settings()
