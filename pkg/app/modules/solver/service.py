"""
Damped Newton for F_t(g) = 0 at a fixed t.

Each iteration solves L u = -r in the traceless Hermitian basis, with L
the symmetrized finite-difference operator (plus tikhonov * Id when its
smallest eigenvalue drops below eig_floor), and moves g <- exp(a U) g with
a backtracking line search on the Frobenius norm of the residual.
"""

import logging
from typing import Optional, Sequence, Union

import numpy as np
from scipy.linalg import LinAlgError, expm, polar, solve

from app.common.exceptions import InvalidPointError, NoBalancedModelError, NumericalFailureError
from app.modules.integration.schemas import CurveScheme, PointScheme, QuadratureGrid
from app.modules.integration.service import default_grid, transform_scheme
from app.modules.linearization.service import assemble_operator
from app.modules.moment_map.schemas import LambdaConvention
from app.modules.moment_map.service import aux_scale, moment_matrix, residual_t
from app.modules.projective.schemas import GroupElement, HermitianMatrix
from app.modules.projective.service import from_hermitian_coordinates, hermitian_coordinates
from app.modules.solver.schemas import NewtonResult, SolverConfig, SolveStatus
from app.modules.stability.service import general_position, roots_of_unity_config

logger = logging.getLogger(__name__)

AnyScheme = Union[PointScheme, CurveScheme]
GroupLike = Union[GroupElement, np.ndarray]
Convention = Optional[Union[str, LambdaConvention]]

# Frobenius bound on a single Newton step exp(a U)
_MAX_STEP_NORM = 2.0
# Armijo constant of the line search
_SUFFICIENT_DECREASE = 1e-4


def _matrix(g: Optional[GroupLike], size: int) -> np.ndarray:
    if g is None:
        return np.eye(size, dtype=np.complex128)
    return np.array(g.matrix if isinstance(g, GroupElement) else g, dtype=np.complex128)


def gauge_normalize(g: GroupLike) -> GroupElement:
    """
    Representative of g modulo unitary (left) and scalar factors.

    g = k p with k unitary and p positive Hermitian; returns p / det(p)^(1/(n+1)).
    """
    matrix = _matrix(g, 0)
    _, positive = polar(matrix, side="right")
    determinant = np.linalg.det(positive).real
    representative = positive / determinant ** (1.0 / matrix.shape[0])
    return GroupElement(matrix=0.5 * (representative + representative.conj().T))


def _try_residual(g, X, D, t, grid, convention, n_jobs):
    try:
        return residual_t(g, X, D, t, grid, convention=convention, n_jobs=n_jobs)
    except (NumericalFailureError, InvalidPointError):
        return None


def newton_solve_at_t(
    g0: Optional[GroupLike],
    X: AnyScheme,
    D: Optional[PointScheme],
    t: float,
    config: Optional[SolverConfig] = None,
    grid: Optional[QuadratureGrid] = None,
    convention: Convention = None,
    n_jobs: Optional[int] = None,
    tolerance: Optional[float] = None,
) -> NewtonResult:
    """
    Solve F_t(g) = 0 starting from g0.

    Args:
        g0: starting group element (None = identity)
        X, D, t: data of F_t, t >= 0
        config: Newton settings (defaults from settings)
        grid: quadrature rule (defaults from settings)
        tolerance: absolute Frobenius tolerance; defaults to
            config.residual_tol * vol(X)

    Returns:
        NewtonResult with status converged, stalled (budget or line search
        exhausted) or degenerate (line search failed on a regularized system)

    Raises:
        NumericalFailureError: residual or Newton direction became non-finite
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    config = config or SolverConfig()
    grid = grid or default_grid()
    size = X.n + 1
    g = _matrix(g0, size)
    residual = residual_t(g, X, D, t, grid, convention=convention, n_jobs=n_jobs)
    tol = config.absolute_tol(residual.volume) if tolerance is None else tolerance
    history = [residual.frobenius]
    min_eigenvalue: Optional[float] = None
    regularized = False
    status = SolveStatus.STALLED
    iterations = 0

    while True:
        if residual.frobenius < tol:
            status = SolveStatus.CONVERGED
            break
        if iterations >= config.max_newton_iters:
            status = SolveStatus.DEGENERATE if regularized else SolveStatus.STALLED
            break
        operator = assemble_operator(g, X, D, t, config.step_fd, grid, convention=convention, n_jobs=n_jobs)
        min_eigenvalue = operator.min_eigenvalue
        system = operator.symmetrized
        regularized = min_eigenvalue < config.eig_floor
        if regularized:
            system = system + config.tikhonov * np.eye(system.shape[0])
        rhs = -hermitian_coordinates(residual.matrix)
        try:
            coefficients = solve(system, rhs, assume_a="sym")
        except LinAlgError:
            status = SolveStatus.DEGENERATE
            break
        if not np.all(np.isfinite(coefficients)):
            raise NumericalFailureError(f"Newton direction is not finite at t = {t}")
        direction = from_hermitian_coordinates(coefficients, X.n).entries
        step = min(1.0, _MAX_STEP_NORM / max(np.linalg.norm(direction), np.finfo(float).tiny))

        accepted = None
        for _ in range(config.max_backtracks + 1):
            candidate = expm(step * direction) @ g
            trial = _try_residual(candidate, X, D, t, grid, convention, n_jobs)
            if trial is not None and trial.frobenius < (1.0 - _SUFFICIENT_DECREASE * step) * residual.frobenius:
                accepted = (candidate, trial)
                break
            step *= config.shrink
        iterations += 1
        if accepted is None:
            status = SolveStatus.DEGENERATE if regularized else SolveStatus.STALLED
            logger.debug(f"Line search failed at t={t}, iteration {iterations}, residual {residual.frobenius:.3e}")
            break
        g, residual = accepted
        history.append(residual.frobenius)
        logger.debug(
            f"Newton t={t} iter {iterations}: residual {residual.frobenius:.3e}, step {step:.3g}, "
            f"min eig {min_eigenvalue:.3e}{' (regularized)' if regularized else ''}"
        )

    g.setflags(write=False)
    return NewtonResult(
        g=g,
        residual=residual,
        status=status,
        iterations=iterations,
        tolerance=tol,
        history=history,
        min_eigenvalue=min_eigenvalue,
        regularized=regularized,
    )


def projective_frame_map(source: Sequence, target: Sequence) -> np.ndarray:
    """
    The linear map sending n+2 points in general position to n+2 others,
    point by point, unique up to scale.
    """
    def frame(points) -> np.ndarray:
        vectors = [p.coords if hasattr(p, "coords") else np.asarray(p, dtype=np.complex128) for p in points]
        basis = np.stack(vectors[:-1], axis=1)
        scales = np.linalg.solve(basis, vectors[-1])
        return basis * scales[None, :]

    return frame(target) @ np.linalg.inv(frame(source))


def balanced_start_for_D(
    D: PointScheme,
    config: Optional[SolverConfig] = None,
    grid: Optional[QuadratureGrid] = None,
    n_jobs: Optional[int] = None,
) -> GroupElement:
    """
    Balanced model of a stable point configuration.

    n+2 points in general position are first sent to the roots-of-unity
    configuration by the projective frame map; any other configuration
    starts from the identity. Newton then polishes at t = 0.

    Raises:
        NoBalancedModelError: Newton did not converge (D is not stable)
    """
    start = np.eye(D.n + 1, dtype=np.complex128)
    if len(D.points) == D.n + 2 and D.mass == D.n + 2 and general_position(D.points):
        start = projective_frame_map(D.points, roots_of_unity_config(D.n).points)
        start = start / np.abs(np.linalg.det(start)) ** (1.0 / (D.n + 1))
    result = newton_solve_at_t(start, D, None, 0.0, config=config, grid=grid, n_jobs=n_jobs)
    if not result.converged:
        raise NoBalancedModelError(
            f"No balanced model found for the auxiliary points ({result.status.value} after "
            f"{result.iterations} iterations, residual {result.residual.frobenius:.3e})"
        )
    logger.info(f"Balanced start found in {result.iterations} Newton iterations")
    return GroupElement(matrix=result.g)


def entry_residual_s(
    g: Optional[GroupLike],
    X: AnyScheme,
    D: PointScheme,
    s: float,
    grid: Optional[QuadratureGrid] = None,
    convention: Convention = None,
) -> HermitianMatrix:
    """
    s M(gX) + c M(gD) - lambda_s Id with s = 1/t; equals s F_{1/s}(g) for
    s > 0 and reduces to the balancing condition of D alone at s = 0.
    """
    if s < 0:
        raise ValueError("s must be >= 0")
    grid = grid or default_grid()
    matrix = _matrix(g, X.n + 1)
    moment_X = moment_matrix(transform_scheme(matrix, X), grid)
    moment_D = moment_matrix(transform_scheme(matrix, D), grid)
    scale = aux_scale(moment_X.scheme_mass, D, convention)
    lam = (s * moment_X.scheme_mass + scale * D.mass) / (X.n + 1)
    entries = s * moment_X.matrix.entries + scale * moment_D.matrix.entries - lam * np.eye(X.n + 1)
    return HermitianMatrix(entries=entries)
