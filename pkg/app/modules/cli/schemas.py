"""
Models of the cli module: the command enum and the resolved RunConfig.
"""

from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.modules.integration.schemas import QuadratureGrid
from app.modules.moment_map.schemas import LambdaConvention
from app.modules.solver.schemas import ContinuitySchedule, SolverConfig
from app.modules.stability.schemas import WeightVector


# ===== ENUMS =====

class Command(str, Enum):
    MOMENT = "moment"
    BALANCE = "balance"
    CONTINUITY = "continuity"
    STABILITY = "stability"
    CHOW_WEIGHT = "chow-weight"
    MAKE_EXAMPLE = "make-example"


# ===== RUN CONFIGURATION =====

class RunConfig(BaseModel):
    """Everything a command needs, with flags already merged over file and environment settings."""
    model_config = ConfigDict(frozen=True)

    command: Command
    input: Optional[Path] = None
    aux: Optional[Path] = None
    out: Optional[Path] = None
    config_file: Optional[Path] = None
    verbose: bool = False
    log_level: str = "INFO"

    # flag orders; None = scheme file quadrature, then `quadrature`
    radial_order: Optional[int] = Field(None, ge=2)
    angular_order: Optional[int] = Field(None, ge=4)
    quadrature: QuadratureGrid = Field(default_factory=QuadratureGrid, description="Orders from settings")
    solver: SolverConfig = Field(default_factory=SolverConfig)
    schedule: ContinuitySchedule = Field(default_factory=ContinuitySchedule)
    convention: LambdaConvention = LambdaConvention.TRACE_FREE
    allow_aux_outside: bool = False
    threads: int = Field(0, ge=0)
    rank_tol: float = Field(1e-10, gt=0)
    seed: int = 0

    t: float = Field(0.0, ge=0)
    samples: int = Field(32, ge=1)
    weights: List[WeightVector] = Field(default_factory=list)
    s_values: Optional[List[float]] = None
    n: int = Field(2, ge=1)
    matrices: bool = True

    @model_validator(mode="after")
    def validate_command_inputs(self):
        if self.command == Command.MAKE_EXAMPLE:
            if self.out is None:
                raise ValueError("make-example needs --out (a directory)")
        elif self.input is None:
            raise ValueError(f"{self.command.value} needs --input")
        if self.command == Command.CHOW_WEIGHT and not self.weights:
            raise ValueError("chow-weight needs at least one --weights vector")
        return self

    @property
    def n_jobs(self) -> int:
        return -1 if self.threads == 0 else self.threads

    def grid(self, fallback: Optional[QuadratureGrid] = None) -> QuadratureGrid:
        """Flag orders over `fallback` (the scheme file), then over settings."""
        fallback = fallback or self.quadrature
        return QuadratureGrid(
            radial_order=self.radial_order or fallback.radial_order,
            angular_order=self.angular_order or fallback.angular_order,
        )

    def parameters(self) -> Dict[str, Any]:
        """Settings echoed into reports; no paths or timestamps, so reports stay comparable."""
        return {
            "seed": self.seed,
            "convention": self.convention.value,
            "solver": self.solver.model_dump(),
            "schedule": self.schedule.model_dump(),
        }
