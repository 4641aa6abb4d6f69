"""
Continuity driver for the family F_t, from large t down to t_end.
"""

import logging
from typing import List, Optional, Union

import numpy as np

from app.common.exceptions import (
    ConfigurationError,
    NoBalancedModelError,
    NumericalFailureError,
    UnstableConfigurationError,
)
from app.core.config import settings
from app.modules.integration.schemas import CurveScheme, PointScheme, QuadratureGrid
from app.modules.integration.service import curve_contains_point, default_grid, volume
from app.modules.linearization.service import assemble_operator
from app.modules.moment_map.schemas import LambdaConvention
from app.modules.moment_map.service import aux_scale
from app.modules.solver.schemas import (
    ContinuityRecord,
    ContinuitySchedule,
    ContinuityStatus,
    ContinuityTrace,
    NewtonResult,
    SolverConfig,
)
from app.modules.solver.service import balanced_start_for_D, entry_residual_s, newton_solve_at_t
from app.modules.stability.schemas import StabilityStatus
from app.modules.stability.service import point_set_stable

logger = logging.getLogger(__name__)

AnyScheme = Union[PointScheme, CurveScheme]

_START_FACTOR = 10.0
_MIN_T_STEP = 1e-12


def aux_points_outside(X: AnyScheme, D: PointScheme) -> List[int]:
    """Indices of auxiliary points that do not lie on X."""
    if isinstance(X, PointScheme):
        return [i for i, p in enumerate(D.points) if not any(p.equivalent(q) for q in X.points)]
    return [i for i, p in enumerate(D.points) if not curve_contains_point(X, p)]


def _record(result: NewtonResult, X, D, t, config, grid, convention, n_jobs) -> ContinuityRecord:
    try:
        min_eigenvalue = assemble_operator(
            result.g, X, D, t, config.step_fd, grid, convention=convention, n_jobs=n_jobs
        ).min_eigenvalue
    except NumericalFailureError:
        min_eigenvalue = None
    return ContinuityRecord(
        t=t,
        g=result.g,
        residual=result.residual.frobenius,
        entry_residual=result.history[0],
        lambda_t=result.residual.lambda_t,
        iterations=result.iterations,
        min_eigenvalue=min_eigenvalue,
        cond_g=float(np.linalg.cond(result.g)),
        status=result.status,
    )


def continuity_run(
    X: AnyScheme,
    D: PointScheme,
    config: Optional[SolverConfig] = None,
    schedule: Optional[ContinuitySchedule] = None,
    grid: Optional[QuadratureGrid] = None,
    convention: Optional[Union[str, LambdaConvention]] = None,
    allow_aux_outside: Optional[bool] = None,
    n_jobs: Optional[int] = None,
    rel_tol: Optional[float] = None,
) -> ContinuityTrace:
    """
    Walk F_t(g) = 0 from t_start to t_end.

    The entry solution comes from the balanced model of D, polished by
    Newton at t_start. Each later solve warm-starts from the previous g;
    a failed step is halved up to `max_halvings` times before the run is
    declared a breakdown.

    Args:
        X: scheme being balanced
        D: stable auxiliary point scheme, on X unless allow_aux_outside
        config: Newton settings
        schedule: t_start, gamma, t_end, max_halvings, t_snap
        grid: quadrature rule
        convention: lambda_t normalization
        allow_aux_outside: accept D not contained in X (logged)
        rel_tol: rank threshold of the stability checks

    Returns:
        ContinuityTrace; on breakdown the last record is the failed attempt
        and point schemes X carry a stability diagnosis. Refusals attach a
        records-free REFUSED trace to the raised error as `partial`

    Raises:
        ConfigurationError: D is not a point scheme of the same dimension,
            or lies off X without allow_aux_outside
        UnstableConfigurationError: D is not stable
        NoBalancedModelError: no balanced model of D was found
    """
    if not isinstance(D, PointScheme):
        raise ConfigurationError("The auxiliary scheme must be a point scheme")
    if D.n != X.n:
        raise ConfigurationError(f"X lives in P^{X.n}, D in P^{D.n}")
    config = config or SolverConfig()
    schedule = schedule or ContinuitySchedule()
    grid = grid or default_grid()
    allow_aux_outside = settings.ALLOW_AUX_OUTSIDE if allow_aux_outside is None else allow_aux_outside

    outside = aux_points_outside(X, D)
    if outside:
        if not allow_aux_outside:
            raise ConfigurationError(f"Auxiliary points {outside} do not lie on X")
        logger.warning(f"Auxiliary points {outside} do not lie on X; continuing as requested")

    vol = volume(X, grid)
    tol = config.absolute_tol(vol)
    t_start = schedule.t_start
    if t_start is None:
        t_start = max(_START_FACTOR * vol / (aux_scale(vol, D, convention) * D.mass), schedule.t_end + 1.0)
    if t_start <= schedule.t_end:
        raise ConfigurationError(f"t_start ({t_start}) must exceed t_end ({schedule.t_end})")

    def refused(detail: str, diagnosis=None) -> ContinuityTrace:
        return ContinuityTrace(
            records=[],
            status=ContinuityStatus.REFUSED,
            tolerance=tol,
            t_start=t_start,
            t_end=schedule.t_end,
            diagnosis=diagnosis,
            failure=detail,
        )

    verdict = point_set_stable(D, rel_tol=rel_tol)
    if verdict.status != StabilityStatus.STABLE:
        detail = f"Auxiliary points are {verdict.status.value} (margin {verdict.margin:.4f}); no balanced entry exists"
        raise UnstableConfigurationError(detail, partial=refused(detail, verdict))
    logger.info(f"Continuity run from t={t_start:.4g} to t={schedule.t_end:.4g}, tolerance {tol:.3e}")

    def solve(g0, t) -> NewtonResult:
        return newton_solve_at_t(g0, X, D, t, config=config, grid=grid, convention=convention, n_jobs=n_jobs, tolerance=tol)

    try:
        g_D = balanced_start_for_D(D, config=config, grid=grid, n_jobs=n_jobs)
    except NoBalancedModelError as exc:
        exc.partial = refused(exc.detail, verdict)
        raise
    scaled_entry = entry_residual_s(g_D, X, D, 1.0 / t_start, grid, convention).frobenius
    records: List[ContinuityRecord] = []
    result = solve(g_D, t_start)
    records.append(_record(result, X, D, t_start, config, grid, convention, n_jobs))
    status = ContinuityStatus.COMPLETED if result.converged else ContinuityStatus.BREAKDOWN
    if result.converged:
        logger.info(f"Entry at t={t_start:.4g}: residual {result.residual.frobenius:.3e} in {result.iterations} iterations")

    t, g = t_start, result.g
    while status == ContinuityStatus.COMPLETED and t > schedule.t_end:
        target = schedule.next_t(t)
        attempt = solve(g, target)
        halvings = 0
        while not attempt.converged and halvings < schedule.max_halvings:
            candidate = 0.5 * (t + target)
            if t - candidate <= _MIN_T_STEP * max(t, 1.0):
                break
            target = candidate
            halvings += 1
            logger.debug(f"Step to t={target:.6g} after {halvings} halvings")
            attempt = solve(g, target)
        record = _record(attempt, X, D, target, config, grid, convention, n_jobs)
        records.append(record)
        if not attempt.converged:
            status = ContinuityStatus.BREAKDOWN
            break
        logger.info(
            f"t={target:.6g}: residual {record.residual:.3e}, {record.iterations} iterations, "
            f"min eig {record.min_eigenvalue}, cond(g) {record.cond_g:.3e}"
        )
        t, g = target, attempt.g

    diagnosis = None
    if status == ContinuityStatus.BREAKDOWN:
        logger.warning(f"Continuity breakdown at t={records[-1].t:.6g} ({records[-1].status.value})")
        if isinstance(X, PointScheme):
            diagnosis = point_set_stable(X, rel_tol=rel_tol)
            logger.info(f"Stability of X at breakdown: {diagnosis.status.value}")

    return ContinuityTrace(
        records=records,
        status=status,
        tolerance=tol,
        t_start=t_start,
        t_end=schedule.t_end,
        diagnosis=diagnosis,
        scaled_entry_residual=scaled_entry,
    )
