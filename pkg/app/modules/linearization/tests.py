"""
Tests para el módulo linearization

Cubre:
- Derivada direccional por diferencias centradas
- Ensamblado del operador: simetría, positividad, núcleo
- Forma cuadrática perp y su identidad con el emparejamiento
"""

import numpy as np
import pytest

from app.common.exceptions import ConfigurationError, InvalidDirectionError
from app.core.config import settings
from app.modules.integration.schemas import PointScheme
from app.modules.integration.service import projective_line, sample_curve_points
from app.modules.linearization.service import (
    assemble_operator,
    consistency_check,
    directional_derivative,
    quadratic_form_perp,
)
from app.modules.projective.schemas import HermitianMatrix
from app.modules.projective.service import fs_norm_sq, fundamental_vector_field


# ===== FIXTURES =====

@pytest.fixture
def rng():
    return np.random.default_rng(99)


def random_direction(rng, size):
    raw = rng.normal(size=(size, size)) + 1j * rng.normal(size=(size, size))
    hermitian = 0.5 * (raw + raw.conj().T)
    hermitian = hermitian - np.trace(hermitian).real / size * np.eye(size)
    return hermitian / np.linalg.norm(hermitian)


def pairing(derivative: HermitianMatrix, A: np.ndarray) -> float:
    return float(np.einsum("ij,ji->", derivative.entries, A).real)


@pytest.fixture
def conic_points(conic):
    return PointScheme(points=sample_curve_points(conic, 4, seed=3))


# ===== TESTS: DERIVADA DIRECCIONAL =====

class TestDirectionalDerivative:
    """(F_t(exp(hA) g) - F_t(exp(-hA) g)) / 2h"""

    def test_pairing_nonnegative_at_roots_of_unity(self, grid, roots_of_unity, rng):
        E = roots_of_unity(2)
        for _ in range(10):
            A = random_direction(rng, 3)
            derivative = directional_derivative(None, E, None, 0.0, A, 1e-5, grid)
            assert pairing(derivative, A) >= 0
            assert abs(derivative.trace) < 1e-9

    def test_fixed_point_gives_zero(self, grid):
        point = PointScheme(points=[[1, 0, 0]])
        A = np.diag([1.0, -0.5, -0.5])
        derivative = directional_derivative(None, point, None, 0.0, A, 1e-5, grid)
        assert np.allclose(derivative.entries, 0, atol=1e-9)

    def test_linearity(self, grid, rng):
        X = PointScheme(points=[rng.normal(size=3) + 1j * rng.normal(size=3) for _ in range(5)])
        A = random_direction(rng, 3)
        B = random_direction(rng, 3)
        combined = directional_derivative(None, X, None, 0.0, A + B, 1e-5, grid).entries
        separate = (directional_derivative(None, X, None, 0.0, A, 1e-5, grid).entries
                    + directional_derivative(None, X, None, 0.0, B, 1e-5, grid).entries)
        assert np.max(np.abs(combined - separate)) < 1e-8

    def test_step_must_be_positive(self, grid, roots_of_unity):
        with pytest.raises(ConfigurationError):
            directional_derivative(None, roots_of_unity(1), None, 0.0, np.diag([1.0, -1.0]), 0.0, grid)

    def test_step_underflow(self, grid, roots_of_unity):
        with pytest.raises(ConfigurationError):
            directional_derivative(None, roots_of_unity(1), None, 0.0, np.diag([1.0, -1.0]), 1e-300, grid)

    def test_direction_must_be_traceless(self, grid, roots_of_unity):
        with pytest.raises(InvalidDirectionError):
            directional_derivative(None, roots_of_unity(1), None, 0.0, np.eye(2), 1e-5, grid)

    def test_direction_must_be_hermitian(self, grid, roots_of_unity):
        with pytest.raises(InvalidDirectionError):
            directional_derivative(None, roots_of_unity(1), None, 0.0, np.array([[0, 1], [0, 0]]), 1e-5, grid)


# ===== TESTS: OPERADOR =====

class TestAssembleOperator:
    """Matriz de dF_t en la base hermítica sin traza"""

    def test_positive_definite_at_roots_of_unity(self, grid, roots_of_unity):
        E = roots_of_unity(2)
        operator = assemble_operator(None, E, E, 1.0, 1e-5, grid)
        assert operator.dimension == 8
        assert operator.relative_asymmetry < 1e-6
        assert operator.min_eigenvalue > 0

    def test_positive_definite_at_balanced_configuration(self, grid, roots_of_unity):
        operator = assemble_operator(None, roots_of_unity(3), None, 0.0, 1e-5, grid)
        assert operator.min_eigenvalue > 1e-6
        assert operator.kernel_dimension() == 0

    def test_single_point_has_kernel(self, grid):
        operator = assemble_operator(None, PointScheme(points=[[1, 0]]), None, 0.0, 1e-5, grid)
        assert operator.dimension == 3
        assert operator.kernel_dimension(tol=1e-8) >= 1

    def test_stabilizer_detected(self, grid):
        # {e0, e1} is balanced and fixed by the diagonal torus
        X = PointScheme(points=[[1, 0], [0, 1]])
        operator = assemble_operator(None, X, None, 0.0, 1e-5, grid)
        spectrum = operator.spectrum()
        assert np.min(np.abs(spectrum)) < 1e-8
        assert operator.kernel_dimension(tol=1e-8) == 1
        assert spectrum[-1] > 0.1

    def test_affine_in_t(self, grid, rng):
        X = PointScheme(points=[rng.normal(size=3) + 1j * rng.normal(size=3) for _ in range(4)])
        D = PointScheme(points=[rng.normal(size=3) + 1j * rng.normal(size=3) for _ in range(4)])
        g = np.eye(3) + 0.2 * rng.normal(size=(3, 3))
        first = assemble_operator(g, X, D, 0.5, 1e-5, grid, convention="trace_free").matrix
        second = assemble_operator(g, X, D, 2.0, 1e-5, grid, convention="trace_free").matrix
        aux_only = assemble_operator(g, D, None, 0.0, 1e-5, grid).matrix
        assert np.max(np.abs((second - first) - 1.5 * aux_only)) < 1e-8

    def test_sequential_and_parallel_agree(self, grid, roots_of_unity):
        E = roots_of_unity(2)
        parallel = assemble_operator(None, E, E, 1.0, 1e-5, grid, n_jobs=2).matrix
        sequential = assemble_operator(None, E, E, 1.0, 1e-5, grid, n_jobs=1).matrix
        assert np.array_equal(parallel, sequential)


# ===== TESTS: FORMA PERP =====

class TestQuadraticFormPerp:
    """Integral de |(grad h_A)^perp|^2"""

    def test_point_scheme_uses_full_gradient(self, grid, rng):
        X = PointScheme(points=[rng.normal(size=3) + 1j * rng.normal(size=3) for _ in range(3)], multiplicities=[1, 2, 1])
        D = PointScheme(points=[rng.normal(size=3) + 1j * rng.normal(size=3) for _ in range(2)])
        A = random_direction(rng, 3)
        expected_X = sum(m * fs_norm_sq(fundamental_vector_field(A, p)) for p, m in zip(X.points, X.multiplicities))
        expected_D = sum(fs_norm_sq(fundamental_vector_field(A, p)) for p in D.points)
        form = quadratic_form_perp(None, X, D, 0.7, A, grid, convention="trace_free")
        assert form.value == pytest.approx(expected_X + 0.7 * expected_D, rel=1e-12)

    def test_zero_direction(self, grid, roots_of_unity):
        assert quadratic_form_perp(None, roots_of_unity(2), None, 0.0, np.zeros((3, 3)), grid).value == 0

    def test_identity_rejected(self, grid, roots_of_unity):
        with pytest.raises(InvalidDirectionError):
            quadratic_form_perp(None, roots_of_unity(2), None, 0.0, np.eye(3), grid)

    def test_line_in_plane_normal_direction(self, grid):
        A = np.zeros((3, 3))
        A[0, 2] = A[2, 0] = 1 / np.sqrt(2)
        form = quadratic_form_perp(None, projective_line(2), None, 0.0, A, grid)
        # |perp|^2 = |z_0|^2 / |z|^2 on the line, whose integral is M_00 = pi
        assert form.value == pytest.approx(np.pi, rel=1e-10)
        assert form.degenerate_nodes == 0

    def test_line_tangential_direction(self, grid):
        form = quadratic_form_perp(None, projective_line(2), None, 0.0, np.diag([1.0, -1.0, 0.0]) / np.sqrt(2), grid)
        assert abs(form.value) < 1e-12

    def test_whole_line_has_no_normal_directions(self, grid):
        form = quadratic_form_perp(None, projective_line(1), None, 0.0, np.diag([1.0, -1.0]) / np.sqrt(2), grid)
        assert abs(form.value) < 1e-12

    def test_nonnegative(self, grid, conic, rng):
        for _ in range(10):
            assert quadratic_form_perp(None, conic, None, 0.0, random_direction(rng, 3), grid).value >= -1e-10


# ===== TESTS: IDENTIDAD =====

class TestConsistency:
    """Re Tr(dF_t(A) A) = forma perp"""

    def test_roots_of_unity_pair(self, grid, roots_of_unity):
        E = roots_of_unity(2)
        report = consistency_check(None, E, E, 1.0, grid, directions=20)
        assert report.max_discrepancy < 1e-5
        assert len(report.directions) == 20

    def test_without_auxiliary(self, grid, roots_of_unity):
        report = consistency_check(None, roots_of_unity(3), None, 0.0, grid, directions=5)
        assert report.max_discrepancy < 1e-5

    def test_conic_with_sampled_points(self, grid, conic, conic_points):
        report = consistency_check(None, conic, conic_points, 1.0, grid, directions=20, seed=4)
        assert report.max_discrepancy < 1e-4

    def test_conic_away_from_identity(self, grid, conic, conic_points):
        g = np.diag([1.5, 1.0, 0.8]) + 0.1j * np.ones((3, 3))
        report = consistency_check(g, conic, conic_points, 0.5, grid, directions=5, seed=5)
        assert report.max_discrepancy < 1e-4

    def test_oracle_step_from_settings(self, grid, roots_of_unity, monkeypatch):
        E = roots_of_unity(2)
        assert consistency_check(None, E, E, 1.0, grid, directions=2).step == settings.FD_ORACLE_STEP
        monkeypatch.setattr(settings, "FD_ORACLE_STEP", 1e-4)
        report = consistency_check(None, E, E, 1.0, grid, directions=2)
        assert report.step == 1e-4
        assert report.max_discrepancy < 1e-5
        assert consistency_check(None, E, E, 1.0, grid, directions=2, step=1e-3).step == 1e-3

    def test_kernel_direction(self, grid):
        X = PointScheme(points=[[1, 0], [0, 1]])
        A = np.diag([1.0, -1.0]) / np.sqrt(2)
        derivative = directional_derivative(None, X, None, 0.0, A, 1e-5, grid)
        assert abs(pairing(derivative, A)) < 1e-10
        assert quadratic_form_perp(None, X, None, 0.0, A, grid).value == 0
