"""
Tests para el módulo solver

Cubre:
- Normalización de gauge por descomposición polar
- Newton amortiguado a t fijo: convergencia, configuraciones inestables
- Modelo balanceado de D y la entrada a t grande
- Camino de continuidad: éxito en la cónica, rechazo de D inestable, ruptura
"""

import numpy as np
import pytest
from scipy.linalg import expm
from scipy.stats import unitary_group

from app.common.exceptions import ConfigurationError, NoBalancedModelError, UnstableConfigurationError
from app.modules.integration.schemas import PointScheme
from app.modules.moment_map.service import balanced_check, residual_t
from app.modules.projective.service import act
from app.modules.solver.continuity import aux_points_outside, continuity_run
from app.modules.solver.schemas import (
    ContinuityRecord,
    ContinuitySchedule,
    ContinuityStatus,
    ContinuityTrace,
    SolverConfig,
    SolveStatus,
)
from app.modules.solver.service import (
    balanced_start_for_D,
    entry_residual_s,
    gauge_normalize,
    newton_solve_at_t,
    projective_frame_map,
)
from app.modules.stability.schemas import StabilityStatus
from app.modules.stability.service import point_set_stable, roots_of_unity_config


# ===== FIXTURES =====

@pytest.fixture
def rng():
    return np.random.default_rng(2024)


def random_direction(rng, size):
    raw = rng.normal(size=(size, size)) + 1j * rng.normal(size=(size, size))
    hermitian = 0.5 * (raw + raw.conj().T)
    hermitian = hermitian - np.trace(hermitian).real / size * np.eye(size)
    return hermitian / np.linalg.norm(hermitian)


def random_points(rng, n, count):
    return PointScheme(points=[rng.normal(size=n + 1) + 1j * rng.normal(size=n + 1) for _ in range(count)])


@pytest.fixture
def double_point():
    return PointScheme(points=[[1, 0], [0, 1]], multiplicities=[2, 1])


@pytest.fixture
def conic_aux():
    """Z(0), Z(inf), Z(1), Z(-1) on the conic."""
    r = np.sqrt(2)
    return PointScheme(points=[[1, 0, 0], [0, 0, 1], [1, r, 1], [1, -r, 1]])


# ===== TESTS: GAUGE =====

class TestGaugeNormalize:
    """Representante positivo de determinante 1"""

    def test_unitary_is_identity(self):
        k = unitary_group.rvs(3, random_state=1)
        assert np.allclose(gauge_normalize(k).matrix, np.eye(3), atol=1e-10)

    def test_diagonal_scaling(self):
        assert np.allclose(gauge_normalize(np.diag([4.0, 1.0])).matrix, np.diag([2.0, 0.5]), atol=1e-12)

    def test_unitary_and_scalar_invariance(self, rng):
        g = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        k = unitary_group.rvs(3, random_state=4)
        base = gauge_normalize(g).matrix
        assert np.allclose(gauge_normalize(k @ g).matrix, base, atol=1e-10)
        assert np.allclose(gauge_normalize((2 - 1j) * g).matrix, base, atol=1e-10)

    def test_idempotent(self, rng):
        g = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        once = gauge_normalize(g)
        assert np.allclose(gauge_normalize(once).matrix, once.matrix, atol=1e-12)
        assert np.linalg.det(once.matrix) == pytest.approx(1.0, abs=1e-10)


# ===== TESTS: NEWTON =====

class TestNewtonSolve:
    """F_t(g) = 0 a t fijo"""

    def test_recovers_roots_of_unity(self, grid, rng):
        E = roots_of_unity_config(2)
        g0 = expm(0.1 * random_direction(rng, 3))
        result = newton_solve_at_t(g0, E, None, 0.0, config=SolverConfig(residual_tol=1e-12), grid=grid)
        assert result.converged
        assert result.residual.frobenius < 1e-10
        # balanced models of E differ from the identity by unitary and scalar factors
        assert np.allclose(gauge_normalize(result.g).matrix, np.eye(3), atol=1e-6)

    def test_two_points_become_antipodal(self, grid):
        X = PointScheme(points=[[1, 0], [1, 1]])
        result = newton_solve_at_t(None, X, None, 0.0, config=SolverConfig(residual_tol=1e-12), grid=grid)
        assert result.converged
        assert result.residual.frobenius < 1e-10
        first, second = (act(result.g, p).unit() for p in X.points)
        assert abs(np.vdot(first, second)) < 1e-5

    def test_unstable_configuration_does_not_converge(self, grid, double_point):
        result = newton_solve_at_t(None, double_point, None, 0.0, grid=grid)
        assert not result.converged
        assert result.status in (SolveStatus.STALLED, SolveStatus.DEGENERATE)

    def test_negative_t_rejected(self, grid, roots_of_unity):
        with pytest.raises(ValueError):
            newton_solve_at_t(None, roots_of_unity(1), None, -1.0, grid=grid)

    def test_already_balanced_needs_no_iterations(self, grid, roots_of_unity):
        result = newton_solve_at_t(None, roots_of_unity(3), None, 0.0, grid=grid)
        assert result.converged
        assert result.iterations == 0

    def test_quadratic_tail(self, grid, rng):
        E = roots_of_unity_config(2)
        g0 = expm(0.3 * random_direction(rng, 3))
        result = newton_solve_at_t(g0, E, None, 0.0, config=SolverConfig(residual_tol=1e-13), grid=grid)
        assert result.converged
        small = [(a, b) for a, b in zip(result.history, result.history[1:]) if a < 1e-2]
        assert small
        for before, after in small:
            assert after <= 100 * before ** 2 + 1e-12

    def test_tolerance_override(self, grid, rng):
        E = roots_of_unity_config(1)
        g0 = expm(0.2 * random_direction(rng, 2))
        result = newton_solve_at_t(g0, E, None, 0.0, grid=grid, tolerance=1e-3)
        assert result.tolerance == 1e-3
        assert result.residual.frobenius < 1e-3


class TestStabilityAgreement:
    """Convergencia a t = 0 coincide con el criterio de conteo"""

    def test_random_and_engineered(self, grid):
        rng = np.random.default_rng(77)
        config = SolverConfig(max_newton_iters=60)
        agree = 0
        total = 0
        for trial in range(120):
            n = 1 if trial % 2 == 0 else 2
            if trial < 100:
                X = random_points(rng, n, int(rng.integers(n + 2, n + 5)))
            else:
                heavy = rng.normal(size=n + 1) + 1j * rng.normal(size=n + 1)
                others = [rng.normal(size=n + 1) + 1j * rng.normal(size=n + 1) for _ in range(n + 1)]
                X = PointScheme(points=[heavy] + others, multiplicities=[n + 2] + [1] * (n + 1))
            stable = point_set_stable(X, n_jobs=1).status == StabilityStatus.STABLE
            result = newton_solve_at_t(None, X, None, 0.0, config=config, grid=grid, n_jobs=1)
            total += 1
            agree += int(result.converged == stable)
        assert agree >= 119
        assert total == 120


# ===== TESTS: MODELO BALANCEADO DE D =====

class TestBalancedStart:
    """Modelo balanceado de la configuración auxiliar"""

    def test_frame_map_sends_points(self, rng):
        source = random_points(rng, 2, 4)
        target = roots_of_unity_config(2)
        F = projective_frame_map(source.points, target.points)
        for p, q in zip(source.points, target.points):
            assert act(F, p).equivalent(q)

    def test_roots_of_unity_is_fixed(self, grid):
        g = balanced_start_for_D(roots_of_unity_config(2), grid=grid)
        assert np.allclose(gauge_normalize(g).matrix, np.eye(3), atol=1e-8)

    def test_moved_roots_of_unity(self, grid, rng):
        g0 = expm(0.5 * random_direction(rng, 3))
        D = roots_of_unity_config(2).transformed(g0)
        g = balanced_start_for_D(D, grid=grid)
        assert np.allclose(gauge_normalize(g.matrix @ g0).matrix, np.eye(3), atol=1e-6)

    def test_general_position_points(self, grid, rng):
        D = random_points(rng, 2, 4)
        g = balanced_start_for_D(D, grid=grid)
        balanced, _ = balanced_check(g, D, grid, 1e-9)
        assert balanced

    def test_unstable_points_have_no_model(self, grid, double_point):
        with pytest.raises(NoBalancedModelError):
            balanced_start_for_D(double_point, config=SolverConfig(max_newton_iters=20), grid=grid)


class TestEntryResidual:
    """s M(gX) + c M(gD) - lambda_s Id"""

    def test_matches_scaled_residual(self, grid, conic, conic_aux, rng):
        g = expm(0.2 * random_direction(rng, 3))
        s = 0.5
        entry = entry_residual_s(g, conic, conic_aux, s, grid)
        scaled = s * residual_t(g, conic, conic_aux, 1.0 / s, grid).matrix.entries
        assert np.allclose(entry.entries, scaled, atol=1e-10)

    def test_zero_at_balanced_aux(self, grid, roots_of_unity):
        E = roots_of_unity(2)
        assert entry_residual_s(None, E, E, 0.0, grid).frobenius < 1e-12

    def test_negative_s_rejected(self, grid, roots_of_unity):
        E = roots_of_unity(1)
        with pytest.raises(ValueError):
            entry_residual_s(None, E, E, -0.1, grid)


# ===== TESTS: CALENDARIO Y TRAZA =====

class TestSchedule:
    """t <- max(gamma t, t_end) con salto final"""

    def test_geometric_then_snap(self):
        schedule = ContinuitySchedule(t_start=1.0, gamma=0.5, t_snap=0.1)
        assert schedule.next_t(1.0) == 0.5
        assert schedule.next_t(0.15) == 0.0

    def test_respects_t_end(self):
        schedule = ContinuitySchedule(t_start=1.0, gamma=0.5, t_end=0.4, t_snap=0.0)
        assert schedule.next_t(0.6) == 0.4

    def test_start_must_exceed_end(self):
        with pytest.raises(ValueError):
            ContinuitySchedule(t_start=1.0, t_end=2.0)

    def test_trace_requires_decreasing_t(self):
        record = dict(g=np.eye(2), residual=0.0, entry_residual=0.0, lambda_t=1.0, iterations=0, cond_g=1.0,
                      status=SolveStatus.CONVERGED)
        with pytest.raises(ValueError):
            ContinuityTrace(
                records=[ContinuityRecord(t=1.0, **record), ContinuityRecord(t=2.0, **record)],
                status=ContinuityStatus.COMPLETED,
                tolerance=1e-9,
                t_start=1.0,
                t_end=0.0,
            )


# ===== TESTS: CONTINUIDAD =====

class TestContinuityRun:
    """Camino F_t desde t grande hasta t_end"""

    def test_roots_of_unity_trivial(self, grid, roots_of_unity):
        E = roots_of_unity(2)
        trace = continuity_run(E, E, grid=grid, n_jobs=1)
        assert trace.completed
        assert trace.final.t == 0.0
        assert all(record.residual < trace.tolerance for record in trace.records)
        assert all(record.iterations <= 1 for record in trace.records)

    def test_conic_end_to_end(self, grid, conic, conic_aux):
        config = SolverConfig(residual_tol=5e-10)
        schedule = ContinuitySchedule(t_start=50.0)
        trace = continuity_run(conic, conic_aux, config=config, schedule=schedule, grid=grid)
        assert trace.completed
        assert trace.final.t == 0.0
        ts = [record.t for record in trace.records]
        assert all(b < a for a, b in zip(ts, ts[1:]))
        for record in trace.records:
            assert record.status == SolveStatus.CONVERGED
            assert record.residual < 1e-8
            if record.t > 0:
                # the conic has a positive-dimensional stabilizer, so only t > 0 is nondegenerate
                assert record.min_eigenvalue >= 1e-6
        bound = conic_aux.mass * (1 + 1 / np.sqrt(3))
        for before, after in zip(trace.records, trace.records[1:]):
            assert after.entry_residual <= before.residual + (before.t - after.t) * bound + 1e-12
        balanced, _ = balanced_check(trace.final.g, conic, grid, 1e-8)
        assert balanced

    def test_scaled_entry_residual_recorded(self, grid, conic, conic_aux):
        schedule = ContinuitySchedule(t_start=50.0, t_end=40.0)
        trace = continuity_run(conic, conic_aux, schedule=schedule, grid=grid, n_jobs=1)
        g_D = balanced_start_for_D(conic_aux, grid=grid, n_jobs=1)
        expected = entry_residual_s(g_D, conic, conic_aux, 1.0 / 50.0, grid).frobenius
        assert trace.scaled_entry_residual == pytest.approx(expected, rel=1e-9)
        # F_t = t E_{1/t}
        assert trace.records[0].entry_residual == pytest.approx(50.0 * expected, rel=1e-9)

    def test_scaled_entry_residual_zero_when_balanced(self, grid, roots_of_unity):
        E = roots_of_unity(2)
        assert continuity_run(E, E, grid=grid, n_jobs=1).scaled_entry_residual < 1e-12

    def test_unstable_aux_refused(self, grid):
        D = PointScheme(points=[[1, 0, 0], [0, 1, 0], [1, 1, 0], [0, 0, 1]])
        with pytest.raises(UnstableConfigurationError) as exc_info:
            continuity_run(D, D, grid=grid)
        partial = exc_info.value.partial
        assert isinstance(partial, ContinuityTrace)
        assert partial.status == ContinuityStatus.REFUSED
        assert partial.records == []
        assert partial.final is None
        assert partial.diagnosis.status != StabilityStatus.STABLE
        assert partial.failure == exc_info.value.detail
        assert partial.t_start > partial.t_end

    def test_rank_tolerance_reaches_stability_check(self, grid):
        # nearly collinear: stable at the default threshold, unstable once the threshold swallows the offset
        D = PointScheme(points=[[1, 0, 0], [0, 1, 0], [1, 1, 1e-6], [0, 0, 1]])
        assert point_set_stable(D).status == StabilityStatus.STABLE
        with pytest.raises(UnstableConfigurationError):
            continuity_run(D, D, grid=grid, rel_tol=1e-3)

    def test_aux_outside_refused(self, grid, conic):
        E = roots_of_unity_config(2)
        assert aux_points_outside(conic, E) == [0, 1, 2, 3]
        with pytest.raises(ConfigurationError):
            continuity_run(conic, E, grid=grid, allow_aux_outside=False)

    def test_dimension_mismatch(self, grid, conic):
        with pytest.raises(ConfigurationError):
            continuity_run(conic, roots_of_unity_config(1), grid=grid)

    def test_breakdown_on_unstable_points(self, grid, double_point):
        # X + t D stays stable exactly for t > 1/3
        config = SolverConfig(max_newton_iters=15)
        schedule = ContinuitySchedule(max_halvings=3)
        trace = continuity_run(
            double_point, roots_of_unity_config(1), config=config, schedule=schedule, grid=grid,
            allow_aux_outside=True, n_jobs=1,
        )
        assert trace.status == ContinuityStatus.BREAKDOWN
        assert trace.last_good is not None
        assert trace.last_good.t > 0.3
        assert trace.final.status != SolveStatus.CONVERGED
        assert trace.diagnosis.status == StabilityStatus.UNSTABLE

    def test_gauge_invariance(self, grid, rng):
        X = random_points(rng, 2, 6)
        D = PointScheme(points=X.points[:4])
        k = unitary_group.rvs(3, random_state=11)
        schedule = ContinuitySchedule(t_start=20.0)
        first = continuity_run(X, D, schedule=schedule, grid=grid, n_jobs=1)
        second = continuity_run(X.transformed(k), D.transformed(k), schedule=schedule, grid=grid, n_jobs=1)
        assert first.completed and second.completed
        assert len(first.records) == len(second.records)
        for a, b in zip(first.records, second.records):
            assert a.t == b.t
            assert abs(a.residual - b.residual) < 1e-9
