"""
Models of the moment_map module: moment matrices, residuals and the lambda_t convention.
"""

from enum import Enum
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field

from app.modules.projective.schemas import HermitianMatrix


# ===== ENUMS =====

class LambdaConvention(str, Enum):
    # lambda_t = (vol(X) + t mass(D)) / (n+1)
    TRACE_FREE = "trace_free"
    # D rescaled to mass vol(X), lambda_t = (1 + t) vol(X) / (n+1)
    RESCALED_AUX = "rescaled_aux"


# ===== MODELS =====

class MomentMatrix(BaseModel):
    """M_ij = integral of z_i conj(z_j) / |z|^2 over the scheme."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    matrix: HermitianMatrix
    scheme_mass: float = Field(..., description="Integral of the volume form used for normalization")

    @property
    def trace_defect(self) -> float:
        return abs(self.matrix.trace - self.scheme_mass) / max(self.scheme_mass, 1.0)

    @property
    def min_eigenvalue(self) -> float:
        return float(self.matrix.eigenvalues()[0])


class Residual(BaseModel):
    """Hermitian representative M(gX) + t c M(gD) - lambda_t Id of F_t(g)."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    matrix: HermitianMatrix
    frobenius: float = Field(..., ge=0)
    t: float = 0.0
    lambda_t: float
    volume: float = Field(..., description="Volume of gX used in lambda_t")
    aux_mass: float = Field(0.0, description="Effective mass of the auxiliary scheme after rescaling")

    @property
    def trace_defect(self) -> float:
        """|Tr| relative to frobenius + scheme mass."""
        return abs(self.matrix.trace) / (self.frobenius + self.volume + self.t * self.aux_mass)

    def eigenvalue_extremes(self):
        eigenvalues = self.matrix.eigenvalues()
        return float(eigenvalues[0]), float(eigenvalues[-1])


class BalancedReport(BaseModel):
    """Outcome of a balancedness check of gX."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    balanced: bool
    tolerance: float
    residual: Residual
    min_eigenvalue: float
    max_eigenvalue: float
    moment: Optional[MomentMatrix] = None

    @property
    def relative_residual(self) -> float:
        return self.residual.frobenius / self.residual.volume
