"""Configuration for cavity QND simulations"""
from functools import lru_cache
from pathlib import Path
from typing import Optional

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    # Application
    log_level: str = "WARNING"

    # Quadrature tolerances
    tol_1d: float = 1e-8
    tol_2d: float = 1e-6
    tol_root: float = 1e-4
    tol_oracle: float = 1e-8
    max_norm_drift: float = 1e-6

    # Default grid (units of 1/Gamma)
    grid_margin: float = 20.0
    grid_tail_factor: float = 5.0
    max_spacing: float = 0.05
    spacing_per_duration: float = 50.0

    # Sweeps
    asymmetric_ancilla: float = 40.0
    max_workers: int = 4
    max_bracket_expansions: int = 12
    max_root_iterations: int = 100
    min_duration: float = 0.5
    max_duration: float = 1000.0

    # Full-model oracle
    max_step_halvings: int = 6
    oracle_tail: float = 60.0

    # Physical scenario
    decoherence_seconds: float = 1e-9

    # CLI
    output_dir: Optional[Path] = None

    model_config = SettingsConfigDict(env_prefix="QND_", env_file=".env", extra="ignore")


@lru_cache()
def get_settings() -> Settings:
    return Settings()
