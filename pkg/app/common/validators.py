"""
Numerical validators shared by the modules
"""
from typing import Sequence

import numpy as np
from scipy.linalg import svdvals


def as_complex_vector(values) -> np.ndarray:
    """
    1-D complex128 copy of the input; accepts plain numbers or [re, im] pairs.
    """
    array = np.asarray(values)
    if array.ndim == 2 and array.shape[-1] == 2 and not np.iscomplexobj(array):
        array = array[..., 0] + 1j * array[..., 1]
    return np.array(array, dtype=np.complex128).reshape(-1)


def as_complex_matrix(values) -> np.ndarray:
    """Square complex128 matrix; accepts nested [re, im] pairs."""
    array = np.asarray(values)
    if array.ndim == 3 and array.shape[-1] == 2 and not np.iscomplexobj(array):
        array = array[..., 0] + 1j * array[..., 1]
    array = np.array(array, dtype=np.complex128)
    if array.ndim != 2 or array.shape[0] != array.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {array.shape}")
    return array


def validate_finite(array: np.ndarray) -> bool:
    return bool(np.all(np.isfinite(array)))


def validate_hermitian(matrix: np.ndarray, tol: float = 1e-12) -> bool:
    """True when the matrix is Hermitian up to `tol` relative to its norm."""
    scale = max(np.linalg.norm(matrix), 1.0)
    return bool(np.linalg.norm(matrix - matrix.conj().T) <= tol * scale)


def numerical_rank(vectors: Sequence[np.ndarray], rel_tol: float = 1e-10) -> int:
    """
    Rank of the span of `vectors` after normalizing each to unit length.

    Singular values below rel_tol * (largest singular value) count as zero.
    """
    if len(vectors) == 0:
        return 0
    stacked = np.stack([v / np.linalg.norm(v) for v in vectors], axis=1)
    sigma = svdvals(stacked)
    if sigma[0] == 0:
        return 0
    return int(np.sum(sigma > rel_tol * sigma[0]))


def validate_sum_zero(weights: Sequence[float], tol: float = 1e-12) -> bool:
    scale = max(1.0, float(np.max(np.abs(weights)))) if len(weights) else 1.0
    return abs(float(np.sum(weights))) <= tol * scale
