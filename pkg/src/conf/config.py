import os
from importlib import metadata
from typing import Optional

from pydantic import BaseSettings, Field


class Settings(BaseSettings):
    workers: Optional[int] = Field(None, ge=1)
    log_level: str = "INFO"
    logging_config: str = "logging.ini"
    chunk_size: int = Field(25, ge=1)
    m_verify: int = Field(64, ge=1)
    verify_samples: int = Field(500, ge=1)
    ci_samples: int = Field(200, ge=1)
    divergence_threshold: float = 1e12
    stability_margin: float = 1e-9

    class Config:
        env_prefix = "SDSS_"
        env_file = ".env"
        env_file_encoding = "utf-8"


settings = Settings()


def resolve_workers(configured: Optional[int] = None) -> int:
    """
    The resolve_workers function decides how many worker processes evaluate trajectories.
    The environment variable SDSS_WORKERS wins over the run config, which wins over the
    number of available CPUs.

    :param configured: Optional[int]: Worker count taken from the run config
    :return: A positive worker count
    """
    env_workers = Settings().workers
    if env_workers:
        return env_workers
    if configured:
        return configured
    return os.cpu_count() or 1


try:
    TOOL_VERSION = metadata.version("sdss-synth")
except metadata.PackageNotFoundError:
    TOOL_VERSION = "0.1.0"
