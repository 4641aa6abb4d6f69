"""
Domain types of complex projective space.

Arrays held by these models are complex128 and flagged read-only, so the
models can be shared across threads freely.
"""

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator

from app.common.exceptions import InconsistentTangentError, InvalidPointError
from app.common.validators import as_complex_matrix, as_complex_vector, validate_finite


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


class ProjPoint(BaseModel):
    """Point of P^n given by a nonzero homogeneous coordinate vector (not normalized)."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    coords: np.ndarray

    @field_validator("coords", mode="before")
    @classmethod
    def validate_coords(cls, v):
        array = as_complex_vector(v)
        if array.size == 0 or not validate_finite(array) or np.linalg.norm(array) == 0:
            raise InvalidPointError("Homogeneous coordinates must be finite and not all zero")
        return _frozen(array)

    @property
    def n(self) -> int:
        return self.coords.size - 1

    @property
    def norm_sq(self) -> float:
        return float(np.vdot(self.coords, self.coords).real)

    def unit(self) -> np.ndarray:
        return self.coords / np.sqrt(self.norm_sq)

    def equivalent(self, other: "ProjPoint", tol: float = 1e-10) -> bool:
        """True when the two coordinate vectors are proportional (up to tol)."""
        overlap = abs(np.vdot(self.unit(), other.unit()))
        return bool(1.0 - overlap ** 2 <= tol)


class HermitianMatrix(BaseModel):
    """(n+1)x(n+1) Hermitian matrix, symmetrized on construction."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    entries: np.ndarray

    @field_validator("entries", mode="before")
    @classmethod
    def symmetrize(cls, v):
        array = as_complex_matrix(v)
        return _frozen(0.5 * (array + array.conj().T))

    @classmethod
    def zeros(cls, size: int) -> "HermitianMatrix":
        return cls(entries=np.zeros((size, size), dtype=np.complex128))

    @classmethod
    def identity(cls, size: int) -> "HermitianMatrix":
        return cls(entries=np.eye(size, dtype=np.complex128))

    @property
    def size(self) -> int:
        return self.entries.shape[0]

    @property
    def trace(self) -> float:
        return float(np.trace(self.entries).real)

    @property
    def frobenius(self) -> float:
        return float(np.linalg.norm(self.entries))

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.entries)

    def pair(self, other: "HermitianMatrix") -> float:
        """Real inner product Re Tr(AB)."""
        return float(np.einsum("ij,ji->", self.entries, other.entries).real)


class TangentVector(BaseModel):
    """Tangent vector at `base`, represented by an ambient lift orthogonal to base.coords."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    base: ProjPoint
    ambient: np.ndarray

    @field_validator("ambient", mode="before")
    @classmethod
    def validate_ambient(cls, v):
        return _frozen(as_complex_vector(v))

    @model_validator(mode="after")
    def check_orthogonal(self):
        if self.ambient.shape != self.base.coords.shape:
            raise InconsistentTangentError(
                f"Ambient lift has shape {self.ambient.shape}, base point {self.base.coords.shape}"
            )
        overlap = abs(np.vdot(self.base.coords, self.ambient))
        bound = 1e-12 * np.linalg.norm(self.ambient) * np.linalg.norm(self.base.coords)
        if overlap > bound + np.finfo(float).tiny:
            raise InconsistentTangentError(
                f"Ambient lift is not orthogonal to its base point (|<v,z>| = {overlap:.3e})"
            )
        return self


class GroupElement(BaseModel):
    """Invertible matrix of GL_{n+1}(C) acting on homogeneous coordinates."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    matrix: np.ndarray

    @field_validator("matrix", mode="before")
    @classmethod
    def validate_invertible(cls, v):
        array = as_complex_matrix(v)
        if not validate_finite(array):
            raise ValueError("Group element has non-finite entries")
        if abs(np.linalg.det(array)) == 0:
            raise ValueError("Group element is singular")
        return _frozen(array)

    @classmethod
    def identity(cls, size: int) -> "GroupElement":
        return cls(matrix=np.eye(size, dtype=np.complex128))

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    @property
    def condition_number(self) -> float:
        return float(np.linalg.cond(self.matrix))

    def compose(self, other: "GroupElement") -> "GroupElement":
        """self * other (apply other first)."""
        return GroupElement(matrix=self.matrix @ other.matrix)
