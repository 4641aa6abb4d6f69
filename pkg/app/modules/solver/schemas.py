"""
Models of the solver module: Newton settings, the continuity schedule, results and traces.
"""

from enum import Enum
from typing import List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.core.config import settings
from app.modules.moment_map.schemas import Residual
from app.modules.stability.schemas import StabilityVerdict


# ===== ENUMS =====

class SolveStatus(str, Enum):
    CONVERGED = "converged"
    STALLED = "stalled"
    DEGENERATE = "degenerate"


class ContinuityStatus(str, Enum):
    COMPLETED = "completed"
    BREAKDOWN = "breakdown"
    REFUSED = "refused"


# ===== CONFIGURATION =====

class SolverConfig(BaseModel):
    """Newton settings; residual_tol is relative to the volume of X."""
    model_config = ConfigDict(frozen=True)

    residual_tol: float = Field(default_factory=lambda: settings.RESIDUAL_TOL, gt=0)
    max_newton_iters: int = Field(default_factory=lambda: settings.MAX_NEWTON_ITERS, ge=1)
    step_fd: float = Field(default_factory=lambda: settings.STEP_FD, gt=0)
    shrink: float = Field(default_factory=lambda: settings.LINE_SEARCH_SHRINK, gt=0, lt=1)
    max_backtracks: int = Field(default_factory=lambda: settings.MAX_BACKTRACKS, ge=0)
    tikhonov: float = Field(default_factory=lambda: settings.TIKHONOV, ge=0)
    eig_floor: float = Field(default_factory=lambda: settings.EIG_FLOOR, ge=0)

    def absolute_tol(self, volume: float) -> float:
        return self.residual_tol * volume


class ContinuitySchedule(BaseModel):
    """
    Geometric schedule t <- max(gamma t, t_end); once gamma t < t_snap the
    next step goes straight to t_end. t_start = None means
    10 * vol(X) / (c * mass(D)).
    """
    model_config = ConfigDict(frozen=True)

    t_start: Optional[float] = Field(None, gt=0)
    gamma: float = Field(default_factory=lambda: settings.GAMMA, gt=0, lt=1)
    t_end: float = Field(0.0, ge=0)
    max_halvings: int = Field(default_factory=lambda: settings.MAX_HALVINGS, ge=0)
    t_snap: float = Field(default_factory=lambda: settings.T_SNAP, ge=0)

    @model_validator(mode="after")
    def validate_range(self):
        if self.t_start is not None and self.t_start <= self.t_end:
            raise ValueError(f"t_start ({self.t_start}) must exceed t_end ({self.t_end})")
        return self

    def next_t(self, t: float) -> float:
        target = max(self.gamma * t, self.t_end)
        if self.gamma * t < self.t_snap:
            target = self.t_end
        return target


# ===== RESULTS =====

class NewtonResult(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    g: np.ndarray
    residual: Residual
    status: SolveStatus
    iterations: int
    tolerance: float = Field(..., description="Absolute Frobenius tolerance used")
    history: List[float] = Field(default_factory=list, description="Residual norm per accepted iterate")
    min_eigenvalue: Optional[float] = Field(None, description="Smallest eigenvalue of the last assembled operator")
    regularized: bool = False

    @property
    def converged(self) -> bool:
        return self.status == SolveStatus.CONVERGED

    def convergence_order(self) -> Optional[float]:
        """Slope of log r_{k+1} against log r_k over the last three iterates above rounding."""
        usable = [r for r in self.history if r > 1e-14]
        if len(usable) < 3:
            return None
        logs = np.log(usable[-3:])
        if logs[1] == logs[0]:
            return None
        return float((logs[2] - logs[1]) / (logs[1] - logs[0]))


class ContinuityRecord(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    t: float
    g: np.ndarray
    residual: float
    entry_residual: float = Field(..., description="Residual of the warm start before Newton")
    lambda_t: float
    iterations: int
    min_eigenvalue: Optional[float] = None
    cond_g: float
    status: SolveStatus

    @field_validator("g", mode="before")
    @classmethod
    def freeze(cls, v):
        array = np.array(v, dtype=np.complex128)
        array.setflags(write=False)
        return array


class ContinuityTrace(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    records: List[ContinuityRecord]
    status: ContinuityStatus
    tolerance: float
    t_start: float
    t_end: float
    diagnosis: Optional[StabilityVerdict] = Field(
        None, description="Stability of X at breakdown (point schemes), of D when refused"
    )
    scaled_entry_residual: Optional[float] = Field(
        None, description="Frobenius norm of s M(gX) + c M(gD) - lambda_s Id at the balanced start of D, s = 1/t_start"
    )
    failure: Optional[str] = Field(None, description="Why the run was refused")

    @model_validator(mode="after")
    def validate_records(self):
        ts = [record.t for record in self.records]
        if any(b >= a for a, b in zip(ts, ts[1:])):
            raise ValueError("t must be strictly decreasing across records")
        for record in self.records:
            if record.status == SolveStatus.CONVERGED and not record.residual < self.tolerance:
                raise ValueError(f"record at t={record.t} is marked converged above tolerance")
        return self

    @property
    def completed(self) -> bool:
        return self.status == ContinuityStatus.COMPLETED

    @property
    def final(self) -> Optional[ContinuityRecord]:
        return self.records[-1] if self.records else None

    @property
    def last_good(self) -> Optional[ContinuityRecord]:
        converged = [record for record in self.records if record.status == SolveStatus.CONVERGED]
        return converged[-1] if converged else None
