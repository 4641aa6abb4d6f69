"""
Models of the stability module: weight vectors, verdicts, witnesses and curve weight estimates.
"""

from enum import Enum
from typing import List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.common.validators import as_complex_matrix, validate_sum_zero


# ===== ENUMS =====

class StabilityStatus(str, Enum):
    STABLE = "stable"
    UNSTABLE = "unstable"
    BOUNDARY = "not-stable-boundary"


# ===== MODELS =====

class WeightVector(BaseModel):
    """Weights of a diagonal one-parameter subgroup s -> diag(s^w_0, ..., s^w_n)."""
    model_config = ConfigDict(frozen=True)

    weights: List[float]

    @field_validator("weights")
    @classmethod
    def validate_weights(cls, v):
        if len(v) < 2:
            raise ValueError("a weight vector needs at least two entries")
        if not all(np.isfinite(v)):
            raise ValueError("weights must be finite")
        if not validate_sum_zero(v):
            raise ValueError(f"weights must sum to zero (sum = {sum(v):.3e})")
        return [float(w) for w in v]

    @classmethod
    def centered(cls, values) -> "WeightVector":
        """Subtract the mean so the weights sum to zero."""
        array = np.asarray(values, dtype=float)
        return cls(weights=list(array - array.mean()))

    @property
    def size(self) -> int:
        return len(self.weights)

    @property
    def is_trivial(self) -> bool:
        return max(abs(w) for w in self.weights) == 0

    def array(self) -> np.ndarray:
        return np.asarray(self.weights, dtype=float)

    def matrix(self) -> np.ndarray:
        return np.diag(self.array()).astype(np.complex128)

    def scaled(self, factor: float) -> "WeightVector":
        return WeightVector(weights=[factor * w for w in self.weights])

    def permuted(self, permutation: List[int]) -> "WeightVector":
        """Weights moved along a coordinate permutation: entry i goes to position permutation[i]."""
        values = np.empty(self.size)
        values[list(permutation)] = self.array()
        return WeightVector(weights=list(values))


class SubspaceWitness(BaseModel):
    """Subspace spanned by configuration points that violates the counting criterion."""
    indices: List[int] = Field(..., description="Indices of points spanning the subspace")
    dimension: int = Field(..., description="Projective dimension of the span")
    count: int = Field(..., description="Points of D in the span, with multiplicity")
    bound: float = Field(..., description="N (dim + 1) / (n + 1)")

    @property
    def slack(self) -> float:
        return self.bound - self.count


class WeightWitness(BaseModel):
    """One-parameter subgroup diagonal in the unitary frame `frame` (columns)."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    weights: WeightVector
    frame: np.ndarray
    weight: float = Field(..., description="Chow weight of the configuration for this subgroup")
    fixed: bool = Field(False, description="The flat limit equals the configuration")

    @field_validator("frame", mode="before")
    @classmethod
    def validate_frame(cls, v):
        array = as_complex_matrix(v)
        array.setflags(write=False)
        return array


class StabilityVerdict(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    status: StabilityStatus
    subspace: Optional[SubspaceWitness] = None
    weight_witness: Optional[WeightWitness] = None
    margin: float = Field(..., description="Smallest slack of the criterion (negative when violated)")
    candidates: int = Field(0, description="Subspaces or subgroups examined")

    @model_validator(mode="after")
    def unstable_needs_witness(self):
        if self.status == StabilityStatus.UNSTABLE and self.subspace is None and self.weight_witness is None:
            raise ValueError("unstable verdicts carry a witness")
        return self

    @property
    def is_stable(self) -> bool:
        return self.status == StabilityStatus.STABLE


class CurveWeightEstimate(BaseModel):
    """Extrapolated Chow weight of a curve along a diagonal subgroup, with diagnostics."""
    estimate: float
    s_values: List[float]
    values: List[float]
    ratio: Optional[float] = Field(None, description="Observed contraction of successive differences")
    converged: bool = False
    invariant: bool = Field(False, description="W(s) constant: the subgroup preserves the curve")
    flags: List[str] = Field(default_factory=list)
