"""
Models of the linearization module: operators, perp forms and consistency reports.
"""

from typing import List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field


class LinearOperator(BaseModel):
    """
    dF_t at g in the traceless Hermitian basis.

    `matrix` is the raw finite-difference assembly; eigenvalue analysis and
    Newton solves use `symmetrized`.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    matrix: np.ndarray
    t: float
    step: float
    g: Optional[np.ndarray] = None

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.matrix))

    @property
    def symmetrized(self) -> np.ndarray:
        return 0.5 * (self.matrix + self.matrix.T)

    @property
    def asymmetry(self) -> float:
        """Frobenius norm of the antisymmetric part."""
        return float(np.linalg.norm(0.5 * (self.matrix - self.matrix.T)))

    @property
    def relative_asymmetry(self) -> float:
        return self.asymmetry / self.norm if self.norm > 0 else 0.0

    def spectrum(self) -> np.ndarray:
        """Ascending eigenvalues of the symmetrized operator."""
        return np.linalg.eigvalsh(self.symmetrized)

    @property
    def min_eigenvalue(self) -> float:
        return float(self.spectrum()[0])

    def kernel_dimension(self, tol: float = 1e-8) -> int:
        return int(np.sum(np.abs(self.spectrum()) < tol))


class PerpForm(BaseModel):
    """Value of the analytic quadratic form and the nodes where the curve tangent vanished."""
    value: float
    curve_part: float = 0.0
    aux_part: float = 0.0
    degenerate_nodes: int = 0


class DirectionCheck(BaseModel):
    pairing: float = Field(..., description="Re Tr(dF_t(A) A) from finite differences")
    perp_form: float
    discrepancy: float


class ConsistencyReport(BaseModel):
    t: float
    step: float
    directions: List[DirectionCheck]
    max_discrepancy: float
    degenerate_nodes: int = 0
