"""
Finite-difference linearization of F_t and the analytic perp quadratic form.

A traceless Hermitian direction A moves g along s -> exp(sA) g. With this
orientation Re Tr(dF_t(A) A) equals the integral of |(grad h_A)^perp|^2
over gX plus t times the sum of |grad h_A|^2 over gD.
"""

import logging
from typing import Optional, Union

import numpy as np
from scipy.linalg import expm

from app.common.exceptions import ConfigurationError, InvalidDirectionError, NumericalFailureError
from app.common.parallel import ordered_map
from app.common.validators import validate_hermitian
from app.core.config import settings
from app.modules.integration.schemas import CurveScheme, PointScheme, QuadratureGrid
from app.modules.integration.service import sample_curve, transform_scheme, volume
from app.modules.linearization.schemas import ConsistencyReport, DirectionCheck, LinearOperator, PerpForm
from app.modules.moment_map.schemas import LambdaConvention
from app.modules.moment_map.service import aux_scale, residual_t
from app.modules.projective.schemas import GroupElement, HermitianMatrix
from app.modules.projective.service import (
    basis_stack,
    basis_dimension,
    batch_gradient,
    batch_norm_sq,
    hermitian_coordinates,
)

logger = logging.getLogger(__name__)

AnyScheme = Union[PointScheme, CurveScheme]
GroupLike = Union[GroupElement, np.ndarray]
Convention = Optional[Union[str, LambdaConvention]]

# smallest usable central-difference step
_MIN_STEP = 1e-12


def _group_matrix(g: Optional[GroupLike], size: int) -> np.ndarray:
    if g is None:
        return np.eye(size, dtype=np.complex128)
    return g.matrix if isinstance(g, GroupElement) else np.asarray(g, dtype=np.complex128)


def _direction(A, size: int) -> np.ndarray:
    entries = A.entries if isinstance(A, HermitianMatrix) else np.asarray(A, dtype=np.complex128)
    if entries.shape != (size, size):
        raise InvalidDirectionError(f"Direction has shape {entries.shape}, expected {(size, size)}")
    if not validate_hermitian(entries, tol=1e-12):
        raise InvalidDirectionError("Direction is not Hermitian")
    scale = max(float(np.linalg.norm(entries)), 1.0)
    if abs(np.trace(entries)) > 1e-12 * scale:
        raise InvalidDirectionError(f"Direction is not traceless (trace = {np.trace(entries):.3e})")
    return entries


def directional_derivative(
    g: Optional[GroupLike],
    X: AnyScheme,
    D: Optional[PointScheme],
    t: float,
    A,
    step: Optional[float],
    grid: QuadratureGrid,
    convention: Convention = None,
    n_jobs: Optional[int] = None,
) -> HermitianMatrix:
    """
    Central difference of F_t along exp(sA) g.

    Args:
        g: base point of the derivative (None = identity)
        X, D, t: data of F_t
        A: traceless Hermitian direction
        step: finite-difference step (defaults to settings.STEP_FD)
        grid: quadrature rule

    Returns:
        (F_t(exp(step A) g) - F_t(exp(-step A) g)) / (2 step)
    """
    step = settings.STEP_FD if step is None else step
    if not step > _MIN_STEP:
        raise ConfigurationError(f"Finite-difference step {step} is not positive or underflows")
    size = X.n + 1
    direction = _direction(A, size)
    base = _group_matrix(g, size)
    forward = residual_t(expm(step * direction) @ base, X, D, t, grid, convention=convention, n_jobs=n_jobs)
    backward = residual_t(expm(-step * direction) @ base, X, D, t, grid, convention=convention, n_jobs=n_jobs)
    return HermitianMatrix(entries=(forward.matrix.entries - backward.matrix.entries) / (2.0 * step))


def assemble_operator(
    g: Optional[GroupLike],
    X: AnyScheme,
    D: Optional[PointScheme],
    t: float,
    step: Optional[float],
    grid: QuadratureGrid,
    convention: Convention = None,
    n_jobs: Optional[int] = None,
) -> LinearOperator:
    """
    Column k holds the basis coordinates of the derivative along basis element k.

    Columns are independent and assembled in parallel; each column evaluates
    its residuals sequentially.
    """
    step = settings.STEP_FD if step is None else step
    basis = basis_stack(X.n)

    def column(k: int) -> np.ndarray:
        derivative = directional_derivative(g, X, D, t, basis[k], step, grid, convention=convention, n_jobs=1)
        return hermitian_coordinates(derivative)

    columns = ordered_map(column, range(basis_dimension(X.n)), n_jobs=n_jobs)
    matrix = np.stack(columns, axis=1)
    if not np.all(np.isfinite(matrix)):
        raise NumericalFailureError(f"Linearization has non-finite entries at t = {t}")
    base = _group_matrix(g, X.n + 1).copy()
    base.setflags(write=False)
    matrix.setflags(write=False)
    operator = LinearOperator(matrix=matrix, t=t, step=step, g=base)
    logger.debug(
        f"Assembled operator at t={t}: min eig {operator.min_eigenvalue:.3e}, "
        f"asymmetry {operator.relative_asymmetry:.2e}"
    )
    return operator


def quadratic_form_perp(
    g: Optional[GroupLike],
    X: AnyScheme,
    D: Optional[PointScheme],
    t: float,
    A,
    grid: QuadratureGrid,
    convention: Convention = None,
) -> PerpForm:
    """
    Integral over gX of |(grad h_A)^perp|^2 plus t times the sum over gD of |grad h_A|^2.

    For curves, perp is taken against the complex tangent line at each node;
    nodes where the tangent vanishes keep the full gradient and are counted
    in `degenerate_nodes`. Point schemes have no tangent directions.
    """
    size = X.n + 1
    direction = _direction(A, size)
    matrix = _group_matrix(g, size)
    moved = transform_scheme(matrix, X)
    degenerate = 0
    if isinstance(moved, PointScheme):
        _, grad_sq = batch_gradient(direction, moved.coordinate_matrix())
        curve_part = float(np.dot(moved.weight_vector(), grad_sq))
        volume_X = float(moved.mass)
    else:
        curve_part = 0.0
        volume_X = 0.0
        for sample in sample_curve(moved, grid):
            lifts, _ = batch_gradient(direction, sample.coords)
            tangent_sq = batch_norm_sq(sample.tangents)
            regular = tangent_sq > np.finfo(float).tiny
            degenerate += int(np.count_nonzero(~regular))
            overlap = np.einsum("ni,ni->n", sample.tangents.conj(), lifts)
            coefficient = np.where(regular, overlap / np.where(regular, tangent_sq, 1.0), 0.0)
            perp = lifts - coefficient[:, None] * sample.tangents
            perp_sq = 2.0 * batch_norm_sq(perp) / batch_norm_sq(sample.coords)
            curve_part += float(np.dot(sample.measure, perp_sq))
            volume_X += float(np.sum(sample.measure))
    aux_part = 0.0
    if D is not None and t != 0:
        moved_D = transform_scheme(matrix, D)
        _, grad_sq = batch_gradient(direction, moved_D.coordinate_matrix())
        aux_part = t * aux_scale(volume_X, D, convention) * float(np.dot(moved_D.weight_vector(), grad_sq))
    return PerpForm(value=curve_part + aux_part, curve_part=curve_part, aux_part=aux_part, degenerate_nodes=degenerate)


def _random_direction(rng: np.random.Generator, size: int) -> np.ndarray:
    raw = rng.normal(size=(size, size)) + 1j * rng.normal(size=(size, size))
    hermitian = 0.5 * (raw + raw.conj().T)
    hermitian = hermitian - np.trace(hermitian).real / size * np.eye(size)
    return hermitian / np.linalg.norm(hermitian)


def consistency_check(
    g: Optional[GroupLike],
    X: AnyScheme,
    D: Optional[PointScheme],
    t: float,
    grid: QuadratureGrid,
    directions: int = 20,
    seed: int = 0,
    step: Optional[float] = None,
    convention: Convention = None,
) -> ConsistencyReport:
    """
    Compare the finite-difference pairing Re Tr(dF_t(A) A) with the perp form.

    Discrepancies are relative to the perp value, floored at 1e-8 times the
    total mass so that kernel directions (both sides ~ 0) compare absolutely.
    """
    step = settings.FD_ORACLE_STEP if step is None else step
    rng = np.random.default_rng(seed)
    size = X.n + 1
    mass = volume(transform_scheme(_group_matrix(g, size), X), grid)
    if D is not None:
        mass += t * D.mass * aux_scale(mass, D, convention)
    floor = 1e-8 * mass
    checks = []
    degenerate = 0
    for _ in range(directions):
        A = _random_direction(rng, size)
        derivative = directional_derivative(g, X, D, t, A, step, grid, convention=convention)
        pairing = float(np.einsum("ij,ji->", derivative.entries, A).real)
        perp = quadratic_form_perp(g, X, D, t, A, grid, convention=convention)
        degenerate = max(degenerate, perp.degenerate_nodes)
        discrepancy = abs(pairing - perp.value) / max(abs(perp.value), floor)
        checks.append(DirectionCheck(pairing=pairing, perp_form=perp.value, discrepancy=discrepancy))
    report = ConsistencyReport(
        t=t,
        step=step,
        directions=checks,
        max_discrepancy=max(check.discrepancy for check in checks),
        degenerate_nodes=degenerate,
    )
    logger.info(f"Consistency check at t={t}: max discrepancy {report.max_discrepancy:.2e} over {directions} directions")
    return report
