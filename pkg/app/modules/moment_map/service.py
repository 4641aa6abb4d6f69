"""
Moment matrices and the residual of the balancing equations.

Residuals are stored as the Hermitian matrix M(gX) + t c M(gD) - lambda_t Id,
where c = 1 under the trace-free convention and c = vol(gX) / mass(D) when
the auxiliary scheme is rescaled. In both cases lambda_t is computed from
the same quadrature volume as M(gX), so the residual is trace-free to
rounding for every g.
"""

import logging
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from app.common.exceptions import NumericalFailureError
from app.core.config import settings
from app.modules.integration.schemas import CurveScheme, PointScheme, QuadratureGrid
from app.modules.integration.service import (
    integrate_points_batch,
    integrate_samples,
    sample_curve,
    transform_scheme,
    volume,
)
from app.modules.moment_map.schemas import BalancedReport, LambdaConvention, MomentMatrix, Residual
from app.modules.projective.schemas import GroupElement, HermitianMatrix
from app.modules.projective.service import batch_projectors

logger = logging.getLogger(__name__)

AnyScheme = Union[PointScheme, CurveScheme]
GroupLike = Union[GroupElement, np.ndarray]


def _ones(coords: np.ndarray) -> np.ndarray:
    return np.ones(coords.shape[0])


def _convention(convention: Optional[Union[str, LambdaConvention]]) -> LambdaConvention:
    return LambdaConvention(convention or settings.LAMBDA_CONVENTION)


def _matrix(g: Optional[GroupLike], size: int) -> np.ndarray:
    if g is None:
        return np.eye(size, dtype=np.complex128)
    return g.matrix if isinstance(g, GroupElement) else np.asarray(g, dtype=np.complex128)


def moment_matrix(S: AnyScheme, grid: QuadratureGrid, n_jobs: Optional[int] = None) -> MomentMatrix:
    """
    Second moments of the homogeneous coordinates against the scheme's measure.

    Args:
        S: point scheme (counting measure) or curve (FS area)
        grid: quadrature rule, unused for point schemes
        n_jobs: worker count for the curve charts

    Returns:
        MomentMatrix whose trace equals the scheme mass
    """
    if isinstance(S, PointScheme):
        matrix = integrate_points_batch(S, batch_projectors)
        mass = float(S.mass)
    else:
        samples = sample_curve(S, grid, n_jobs=n_jobs)
        matrix = integrate_samples(samples, batch_projectors)
        mass = float(integrate_samples(samples, _ones))
    if not np.all(np.isfinite(matrix)):
        raise NumericalFailureError("Moment matrix has non-finite entries")
    return MomentMatrix(matrix=HermitianMatrix(entries=matrix), scheme_mass=mass)


def aux_scale(volume_X: float, D: Optional[PointScheme], convention: Optional[Union[str, LambdaConvention]] = None) -> float:
    """Weight c applied to the counting measure of D."""
    if D is None or _convention(convention) == LambdaConvention.TRACE_FREE:
        return 1.0
    return volume_X / D.mass


def _lambda(volume_X: float, aux_mass: float, t: float, n: int) -> float:
    return (volume_X + t * aux_mass) / (n + 1)


def lambda_t(
    X: AnyScheme,
    D: Optional[PointScheme],
    t: float,
    grid: QuadratureGrid,
    convention: Optional[Union[str, LambdaConvention]] = None,
) -> float:
    """
    The constant making M(X) + t M(D) - lambda_t Id trace-free.

    trace_free: (vol(X) + t mass(D)) / (n+1).
    rescaled_aux: (1 + t) vol(X) / (n+1) (D carries mass vol(X)).
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    volume_X = volume(X, grid)
    mass = 0.0 if D is None else D.mass * aux_scale(volume_X, D, convention)
    return _lambda(volume_X, mass, t, X.n)


def residual_t(
    g: Optional[GroupLike],
    X: AnyScheme,
    D: Optional[PointScheme],
    t: float,
    grid: QuadratureGrid,
    convention: Optional[Union[str, LambdaConvention]] = None,
    n_jobs: Optional[int] = None,
) -> Residual:
    """
    Hermitian representative of F_t(g).

    Args:
        g: group element (None = identity)
        X: scheme being balanced
        D: auxiliary point scheme, may be None when t = 0
        t: continuity parameter, t >= 0
        grid: quadrature rule
        convention: lambda_t normalization (defaults to settings)

    Returns:
        Residual with matrix M(gX) + t c M(gD) - lambda_t Id
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    matrix = _matrix(g, X.n + 1)
    moment_X = moment_matrix(transform_scheme(matrix, X), grid, n_jobs=n_jobs)
    total = moment_X.matrix.entries
    aux_mass = 0.0
    if D is not None and t != 0:
        scale = aux_scale(moment_X.scheme_mass, D, convention)
        moment_D = moment_matrix(transform_scheme(matrix, D), grid)
        total = total + (t * scale) * moment_D.matrix.entries
        aux_mass = scale * D.mass
    lam = _lambda(moment_X.scheme_mass, aux_mass, t, X.n)
    residual = HermitianMatrix(entries=total - lam * np.eye(X.n + 1))
    frobenius = residual.frobenius
    if not np.isfinite(frobenius):
        raise NumericalFailureError(f"Residual is not finite at t = {t}")
    return Residual(
        matrix=residual,
        frobenius=frobenius,
        t=t,
        lambda_t=lam,
        volume=moment_X.scheme_mass,
        aux_mass=aux_mass,
    )


def balanced_check(
    g: Optional[GroupLike],
    X: AnyScheme,
    grid: QuadratureGrid,
    tol: float,
) -> Tuple[bool, BalancedReport]:
    """
    Is gX balanced, i.e. M(gX) = lambda Id up to tol * vol(X)?

    Returns:
        (balanced, report with residual and its extreme eigenvalues)
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    residual = residual_t(g, X, None, 0.0, grid)
    balanced = residual.frobenius < tol * residual.volume
    low, high = residual.eigenvalue_extremes()
    report = BalancedReport(
        balanced=balanced,
        tolerance=tol,
        residual=residual,
        min_eigenvalue=low,
        max_eigenvalue=high,
    )
    logger.debug(f"Balanced check: frobenius={residual.frobenius:.3e}, volume={residual.volume:.6f}, balanced={balanced}")
    return balanced, report


def weighted_trace(
    X: AnyScheme,
    D: Optional[PointScheme],
    t: float,
    weights: Sequence[float],
    grid: QuadratureGrid,
    g: Optional[GroupLike] = None,
    convention: Optional[Union[str, LambdaConvention]] = None,
) -> float:
    """
    sum_j weights_j (M(gX) + t c M(gD))_jj.

    At a zero of F_t this equals lambda_t * sum(weights), i.e. 0 for
    trace-free weights.
    """
    matrix = _matrix(g, X.n + 1)
    moment_X = moment_matrix(transform_scheme(matrix, X), grid)
    diagonal = np.diag(moment_X.matrix.entries).real
    if D is not None and t != 0:
        scale = aux_scale(moment_X.scheme_mass, D, convention)
        diagonal = diagonal + t * scale * np.diag(moment_matrix(transform_scheme(matrix, D), grid).matrix.entries).real
    return float(np.dot(np.asarray(weights, dtype=float), diagonal))
