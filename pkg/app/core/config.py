from pydantic_settings import BaseSettings, SettingsConfigDict
from typing import Literal
from pydantic import field_validator


class Settings(BaseSettings):
    # Worker pool (0 = all cores, 1 = sequential)
    THREADS: int = 0

    # Quadrature settings
    RADIAL_ORDER: int = 32
    ANGULAR_ORDER: int = 64

    # Newton solver settings
    RESIDUAL_TOL: float = 1e-9  # relative to the scheme volume
    MAX_NEWTON_ITERS: int = 40
    STEP_FD: float = 1e-5
    LINE_SEARCH_SHRINK: float = 0.5
    MAX_BACKTRACKS: int = 12
    TIKHONOV: float = 1e-6
    EIG_FLOOR: float = 1e-8

    # Continuity schedule
    GAMMA: float = 0.7
    MAX_HALVINGS: int = 8
    T_SNAP: float = 1e-2

    # Numerical rank threshold, relative to the largest singular value
    RANK_TOL: float = 1e-10

    # Central-difference step of the validation oracles
    FD_ORACLE_STEP: float = 1e-5

    # How lambda_t is normalized (see moment_map)
    LAMBDA_CONVENTION: Literal["trace_free", "rescaled_aux"] = "trace_free"
    ALLOW_AUX_OUTSIDE: bool = False

    # Environment
    ENVIRONMENT: str = "development"
    LOG_LEVEL: str = "INFO"

    model_config = SettingsConfigDict(
        env_prefix="BALANCED_EMBED_",
        extra="allow",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=True
    )

    @property
    def n_jobs(self) -> int:
        """Worker count in joblib's convention."""
        return -1 if self.THREADS == 0 else self.THREADS

    @field_validator("ALLOW_AUX_OUTSIDE", mode="before")
    @classmethod
    def parse_allow_outside(cls, v):
        if isinstance(v, str):
            return v.lower().strip('"').strip("'") in ("true", "1", "yes", "on")
        return bool(v)

    @field_validator("THREADS")
    @classmethod
    def validate_threads(cls, v):
        if v < 0:
            raise ValueError("THREADS must be >= 0 (0 = auto)")
        return v

    @field_validator("LINE_SEARCH_SHRINK", "GAMMA")
    @classmethod
    def validate_unit_interval(cls, v):
        if not 0 < v < 1:
            raise ValueError("must lie strictly between 0 and 1")
        return v

    @field_validator("RESIDUAL_TOL", "STEP_FD", "RANK_TOL", "FD_ORACLE_STEP", "T_SNAP")
    @classmethod
    def validate_positive(cls, v):
        if v <= 0:
            raise ValueError("must be positive")
        return v


settings = Settings()
