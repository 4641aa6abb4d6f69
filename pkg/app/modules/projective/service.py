"""
Primitives of complex projective space with the Fubini-Study metric.

Conventions:
    - omega_FS = i d dbar log|z|^2 (no 1/2pi), so a line has area 2*pi.
    - A traceless Hermitian matrix A stands for xi = iA in su(n+1); its
      Hamiltonian is h_A(z) = z*Az / |z|^2.
    - Tangent vectors at [z] are ambient lifts v with <z, v> = 0. The
      Riemannian FS metric on lifts is g(v, w) = 2 Re<v, w> / |z|^2 and the
      complex structure J is multiplication by i.
    - grad h_A at [z] has the lift Az - h_A(z) z (the fundamental field of
      A); the unitary flow exp(isA) moves z along J grad h_A and satisfies
      dh_A = -omega_FS(J grad h_A, .).
"""

from functools import lru_cache
from typing import List, Tuple, Union

import numpy as np

from app.common.exceptions import InvalidPointError
from app.modules.projective.schemas import GroupElement, HermitianMatrix, ProjPoint, TangentVector

PointLike = Union[ProjPoint, np.ndarray]
MatrixLike = Union[HermitianMatrix, np.ndarray]


def _coords(z: PointLike) -> np.ndarray:
    if isinstance(z, ProjPoint):
        return z.coords
    array = np.asarray(z, dtype=np.complex128)
    if not np.all(np.isfinite(array)) or np.linalg.norm(array) == 0:
        raise InvalidPointError("Homogeneous coordinates must be finite and not all zero")
    return array


def _entries(A: MatrixLike) -> np.ndarray:
    return A.entries if isinstance(A, HermitianMatrix) else np.asarray(A, dtype=np.complex128)


def _point(z: PointLike) -> ProjPoint:
    return z if isinstance(z, ProjPoint) else ProjPoint(coords=z)


# ===== POINTWISE OPERATIONS =====

def rank_one_projector(z: PointLike) -> HermitianMatrix:
    """P_ij = z_i conj(z_j) / |z|^2."""
    coords = _coords(z)
    return HermitianMatrix(entries=np.outer(coords, coords.conj()) / np.vdot(coords, coords).real)


def hamiltonian(A: MatrixLike, z: PointLike) -> float:
    """h_A(z) = z*Az / |z|^2, a real number in [lambda_min(A), lambda_max(A)]."""
    coords = _coords(z)
    return float((np.vdot(coords, _entries(A) @ coords) / np.vdot(coords, coords)).real)


def fundamental_vector_field(A: MatrixLike, z: PointLike) -> TangentVector:
    """
    Ambient lift Az - h_A(z) z of the holomorphic field generated by A.

    The lift is re-projected orthogonally to z so the tangent invariant
    holds to rounding.
    """
    point = _point(z)
    coords = point.coords
    norm_sq = point.norm_sq
    image = _entries(A) @ coords
    lift = image - (np.vdot(coords, image).real / norm_sq) * coords
    lift = lift - (np.vdot(coords, lift) / norm_sq) * coords
    return TangentVector(base=point, ambient=lift)


def unitary_vector_field(A: MatrixLike, z: PointLike) -> TangentVector:
    """Infinitesimal action of exp(isA): J applied to the fundamental field."""
    field = fundamental_vector_field(A, z)
    return TangentVector(base=field.base, ambient=1j * field.ambient)


def fs_inner(v: TangentVector, w: TangentVector) -> float:
    """Riemannian FS inner product of two tangent vectors sharing a base lift."""
    return float(2.0 * np.vdot(v.ambient, w.ambient).real / v.base.norm_sq)


def fs_norm_sq(v: TangentVector) -> float:
    """
    Squared FS length of v.

    Normalized so that fs_norm_sq(fundamental_vector_field(A, z)) equals
    |grad h_A|^2 at z.
    """
    return fs_inner(v, v)


def fs_symplectic(v: TangentVector, w: TangentVector) -> float:
    """omega_FS(v, w) = g(Jv, w)."""
    return float(2.0 * np.vdot(1j * v.ambient, w.ambient).real / v.base.norm_sq)


def act(g: Union[GroupElement, np.ndarray], z: PointLike) -> ProjPoint:
    """[g . z]"""
    matrix = g.matrix if isinstance(g, GroupElement) else np.asarray(g, dtype=np.complex128)
    return ProjPoint(coords=matrix @ _coords(z))


# ===== BASIS OF su(n+1), HERMITIAN PICTURE =====

@lru_cache(maxsize=16)
def basis_stack(n: int) -> np.ndarray:
    size = n + 1
    pairs = [(j, k) for j in range(size) for k in range(j + 1, size)]
    elements: List[np.ndarray] = []
    for j, k in pairs:
        element = np.zeros((size, size), dtype=np.complex128)
        element[j, k] = element[k, j] = 1.0 / np.sqrt(2.0)
        elements.append(element)
    for j, k in pairs:
        element = np.zeros((size, size), dtype=np.complex128)
        element[j, k] = -1j / np.sqrt(2.0)
        element[k, j] = 1j / np.sqrt(2.0)
        elements.append(element)
    # Cartan part: generalized Gell-Mann diagonals
    for level in range(1, size):
        diagonal = np.zeros(size)
        diagonal[:level] = 1.0
        diagonal[level] = -float(level)
        diagonal = diagonal / np.sqrt(level * (level + 1))
        diagonal[level] = -np.sum(diagonal[:level])
        elements.append(np.diag(diagonal).astype(np.complex128))
    stack = np.stack(elements)
    stack.setflags(write=False)
    return stack


def traceless_hermitian_basis(n: int) -> List[HermitianMatrix]:
    """
    Orthonormal basis of traceless Hermitian (n+1)x(n+1) matrices under Re Tr(AB).

    Order: off-diagonal real pairs, off-diagonal imaginary pairs, diagonal
    Cartan elements; (n+1)^2 - 1 elements in total.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    return [HermitianMatrix(entries=element) for element in basis_stack(n)]


def hermitian_coordinates(X: MatrixLike) -> np.ndarray:
    """Real coordinates Re Tr(X A_k) of the traceless part of X in the basis above."""
    entries = _entries(X)
    return np.einsum("kij,ji->k", basis_stack(entries.shape[0] - 1), entries).real


def from_hermitian_coordinates(coefficients: np.ndarray, n: int) -> HermitianMatrix:
    return HermitianMatrix(entries=np.tensordot(np.asarray(coefficients, dtype=float), basis_stack(n), axes=1))


def basis_dimension(n: int) -> int:
    return (n + 1) ** 2 - 1


# ===== BATCHED FORMS FOR QUADRATURE =====

def batch_norm_sq(coords: np.ndarray) -> np.ndarray:
    return np.einsum("ni,ni->n", coords.conj(), coords).real


def batch_projectors(coords: np.ndarray) -> np.ndarray:
    """(N, n+1) coordinates -> (N, n+1, n+1) rank-one projectors."""
    return np.einsum("ni,nj->nij", coords, coords.conj()) / batch_norm_sq(coords)[:, None, None]


def batch_hamiltonian(A: MatrixLike, coords: np.ndarray) -> np.ndarray:
    images = coords @ _entries(A).T
    return np.einsum("ni,ni->n", coords.conj(), images).real / batch_norm_sq(coords)


def batch_gradient(A: MatrixLike, coords: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Gradient lifts Az - h z for a batch of points.

    Returns:
        (lifts, squared FS norms |grad h_A|^2)
    """
    norm_sq = batch_norm_sq(coords)
    images = coords @ _entries(A).T
    h = np.einsum("ni,ni->n", coords.conj(), images).real / norm_sq
    lifts = images - h[:, None] * coords
    grad_sq = 2.0 * batch_norm_sq(lifts) / norm_sq
    return lifts, grad_sq
