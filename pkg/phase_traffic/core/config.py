"""
Runtime Settings
================

Purpose: Process-wide numerical tolerances and defaults.

Values can be overridden through environment variables prefixed with
PHASE_TRAFFIC_ (or a local .env file), e.g. PHASE_TRAFFIC_LOG_LEVEL=DEBUG.
"""

from dotenv import load_dotenv
from pydantic_settings import BaseSettings, SettingsConfigDict

load_dotenv()


class Settings(BaseSettings):
    """Tolerances, caps and defaults shared by every module."""

    model_config = SettingsConfigDict(env_prefix="PHASE_TRAFFIC_", extra="ignore")

    log_level: str = "INFO"

    # Phase-membership band; states inside it are snapped to the boundary
    state_tol: float = 1e-9
    # Absolute tolerance on densities returned by brentq
    root_tol: float = 1e-12
    # Fronts whose state jump is below this are dropped
    cull_tol: float = 1e-12
    # Speeds closer than this are treated as equal
    speed_tol: float = 1e-10

    event_cap: int = 1_000_000
    default_seed: int = 20240601
    # Default rarefaction step is delta_v_fraction * V_f
    delta_v_fraction: float = 1e-3
    n_jobs: int = 1
    output_dir: str = "outputs"


settings = Settings()
