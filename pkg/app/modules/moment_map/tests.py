"""
Tests para el módulo moment_map

Cubre:
- Matrices de momentos de puntos y curvas
- lambda_t en ambas convenciones
- Residuo F_t: traza nula, equivariancia unitaria, invariancia de escala
- balanced_check y weighted_trace
"""

import numpy as np
import pytest
from scipy.special import comb
from scipy.stats import unitary_group

from app.modules.integration.schemas import CurveScheme, PointScheme, QuadratureGrid
from app.modules.integration.service import projective_line
from app.modules.moment_map.schemas import LambdaConvention
from app.modules.moment_map.service import (
    balanced_check,
    lambda_t,
    moment_matrix,
    residual_t,
    weighted_trace,
)


# ===== FIXTURES =====

@pytest.fixture
def rng():
    return np.random.default_rng(2024)


def random_scheme(rng, count, size):
    return PointScheme(
        points=[rng.normal(size=size) + 1j * rng.normal(size=size) for _ in range(count)],
        multiplicities=[int(m) for m in rng.integers(1, 3, size=count)],
    )


def random_group(rng, size, spread=0.5):
    return np.eye(size) + spread * (rng.normal(size=(size, size)) + 1j * rng.normal(size=(size, size)))


def rational_normal(degree):
    return CurveScheme(degree=degree, components=np.diag(np.sqrt(comb(degree, np.arange(degree + 1)))))


# ===== TESTS: MATRICES DE MOMENTOS =====

class TestMomentMatrix:
    """M(S) = integral de z z* / |z|^2"""

    def test_single_point(self, grid):
        moment = moment_matrix(PointScheme(points=[[1, 0, 0]]), grid)
        expected = np.zeros((3, 3))
        expected[0, 0] = 1
        assert np.allclose(moment.matrix.entries, expected)
        assert moment.scheme_mass == 1

    @pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
    def test_roots_of_unity(self, grid, roots_of_unity, n):
        moment = moment_matrix(roots_of_unity(n), grid)
        assert np.max(np.abs(moment.matrix.entries - (n + 2) / (n + 1) * np.eye(n + 1))) < 1e-12

    def test_projective_line(self, grid):
        moment = moment_matrix(projective_line(), grid)
        assert np.allclose(moment.matrix.entries, np.pi * np.eye(2), atol=1e-10)

    def test_trace_is_mass(self, grid, conic, rng):
        for scheme in (conic, random_scheme(rng, 5, 3)):
            moment = moment_matrix(scheme, grid)
            assert moment.trace_defect < 1e-10

    def test_positive_semidefinite(self, grid, rng):
        for _ in range(20):
            moment = moment_matrix(random_scheme(rng, 3, 4), grid)
            assert moment.min_eigenvalue >= -1e-12 * moment.matrix.trace

    @pytest.mark.parametrize("degree", [1, 2, 3])
    def test_balanced_rational_normal_curves(self, degree):
        grid = QuadratureGrid(radial_order=48, angular_order=64)
        curve = rational_normal(degree)
        residual = residual_t(None, curve, None, 0.0, grid)
        assert residual.frobenius < 1e-7 * residual.volume
        moment = moment_matrix(curve, grid)
        diagonal = np.diag(moment.matrix.entries).real
        assert np.allclose(diagonal, 2 * np.pi * degree / (degree + 1), rtol=1e-7)


# ===== TESTS: LAMBDA =====

class TestLambda:
    """lambda_t"""

    def test_t_zero(self, grid, roots_of_unity):
        E = roots_of_unity(2)
        assert lambda_t(E, None, 0.0, grid) == pytest.approx(4 / 3)

    @pytest.mark.parametrize("n", [1, 2, 4])
    def test_same_configuration(self, grid, roots_of_unity, n):
        E = roots_of_unity(n)
        assert lambda_t(E, E, 1.0, grid) == pytest.approx(2 * (n + 2) / (n + 1))

    def test_conic_with_four_points(self, grid, conic):
        D = PointScheme(points=[[1, 0, 0], [0, 0, 1], [1, np.sqrt(2), 1], [1, -np.sqrt(2), 1]])
        assert lambda_t(conic, D, 0.5, grid, convention="trace_free") == pytest.approx((4 * np.pi + 2) / 3, rel=1e-10)

    def test_rescaled_convention(self, grid, conic):
        D = PointScheme(points=[[1, 0, 0], [0, 0, 1], [1, 1, 1]])
        value = lambda_t(conic, D, 0.5, grid, convention=LambdaConvention.RESCALED_AUX)
        assert value == pytest.approx(1.5 * 4 * np.pi / 3, rel=1e-10)

    def test_negative_t_rejected(self, grid, conic):
        with pytest.raises(ValueError):
            lambda_t(conic, None, -1.0, grid)


# ===== TESTS: RESIDUO =====

class TestResidual:
    """F_t(g) en su representante hermítico"""

    @pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
    def test_roots_of_unity_balanced(self, grid, roots_of_unity, n):
        assert residual_t(None, roots_of_unity(n), None, 0.0, grid).frobenius < 1e-12

    def test_conic_balanced(self, grid, conic):
        residual = residual_t(np.eye(3), conic, None, 0.0, grid)
        assert residual.frobenius < 1e-9
        assert residual.lambda_t == pytest.approx(4 * np.pi / 3, rel=1e-10)

    def test_same_configuration_all_t(self, grid, roots_of_unity):
        E = roots_of_unity(3)
        for t in (0.0, 0.5, 1.0, 25.0):
            assert residual_t(None, E, E, t, grid).frobenius < 1e-11

    def test_trace_free(self, grid, rng):
        for _ in range(100):
            X = random_scheme(rng, 4, 3)
            D = random_scheme(rng, 4, 3)
            g = random_group(rng, 3)
            t = float(rng.uniform(0, 5))
            for convention in LambdaConvention:
                residual = residual_t(g, X, D, t, grid, convention=convention)
                assert residual.trace_defect < 1e-10

    def test_trace_free_curve(self, grid, conic, rng):
        D = random_scheme(rng, 4, 3)
        residual = residual_t(random_group(rng, 3, 0.3), conic, D, 2.0, grid)
        assert residual.trace_defect < 1e-10

    def test_unitary_equivariance(self, grid, rng):
        for seed in range(100):
            X = random_scheme(rng, 4, 3)
            D = random_scheme(rng, 4, 3)
            g = random_group(rng, 3)
            k = unitary_group.rvs(3, random_state=seed)
            t = float(rng.uniform(0, 3))
            moved = residual_t(k @ g, X, D, t, grid).matrix.entries
            expected = k @ residual_t(g, X, D, t, grid).matrix.entries @ k.conj().T
            assert np.max(np.abs(moved - expected)) < 1e-9

    def test_unitary_equivariance_curve(self, grid, conic, rng):
        g = random_group(rng, 3, 0.3)
        k = unitary_group.rvs(3, random_state=1)
        moved = residual_t(k @ g, conic, None, 0.0, grid).matrix.entries
        expected = k @ residual_t(g, conic, None, 0.0, grid).matrix.entries @ k.conj().T
        assert np.max(np.abs(moved - expected)) < 1e-10

    def test_scale_gauge(self, grid, rng, conic):
        for _ in range(100):
            X = random_scheme(rng, 4, 3)
            D = random_scheme(rng, 3, 3)
            g = random_group(rng, 3)
            c = complex(rng.normal(), rng.normal())
            first = residual_t(g, X, D, 1.3, grid).matrix.entries
            second = residual_t(c * g, X, D, 1.3, grid).matrix.entries
            assert np.max(np.abs(first - second)) < 1e-9
        g = random_group(rng, 3, 0.3)
        curve_first = residual_t(g, conic, None, 0.0, grid).matrix.entries
        curve_second = residual_t(3j * g, conic, None, 0.0, grid).matrix.entries
        assert np.max(np.abs(curve_first - curve_second)) < 1e-10

    def test_affine_in_t(self, grid, rng):
        X = random_scheme(rng, 5, 3)
        D = random_scheme(rng, 4, 3)
        g = random_group(rng, 3)
        r0 = residual_t(g, X, D, 0.0, grid).matrix.entries
        r1 = residual_t(g, X, D, 1.0, grid).matrix.entries
        r2 = residual_t(g, X, D, 2.0, grid).matrix.entries
        assert np.allclose(r2 - r1, r1 - r0, atol=1e-12)


# ===== TESTS: BALANCED CHECK =====

class TestBalancedCheck:
    """X balanceado si M(gX) = lambda Id"""

    def test_roots_of_unity(self, grid, roots_of_unity):
        balanced, report = balanced_check(None, roots_of_unity(3), grid, tol=1e-10)
        assert balanced
        assert report.residual.frobenius < 1e-10
        assert report.min_eigenvalue <= report.max_eigenvalue

    def test_skewed_roots_of_unity(self, grid, roots_of_unity):
        g = np.diag([2.0, 1.0, 1.0])
        balanced, report = balanced_check(g, roots_of_unity(2), grid, tol=1e-6)
        assert not balanced
        assert report.max_eigenvalue > 0 > report.min_eigenvalue

    def test_single_point_never_balanced(self, grid, rng):
        for size in (2, 3, 4):
            point = PointScheme(points=[rng.normal(size=size) + 0j])
            balanced, _ = balanced_check(random_group(rng, size), point, grid, tol=1e-6)
            assert not balanced

    def test_tolerance_must_be_positive(self, grid, roots_of_unity):
        with pytest.raises(ValueError):
            balanced_check(None, roots_of_unity(1), grid, tol=0)


class TestWeightedTrace:
    """suma de pesos sobre la diagonal de M(gX) + t M(gD)"""

    def test_vanishes_at_balanced_pair(self, grid, roots_of_unity):
        E = roots_of_unity(2)
        assert abs(weighted_trace(E, E, 2.0, [1.0, 0.0, -1.0], grid)) < 1e-12

    def test_linear_in_weights(self, grid, conic):
        first = weighted_trace(conic, None, 0.0, [2.0, -1.0, -1.0], grid, g=np.diag([2.0, 1.0, 1.0]))
        second = weighted_trace(conic, None, 0.0, [4.0, -2.0, -2.0], grid, g=np.diag([2.0, 1.0, 1.0]))
        assert second == pytest.approx(2 * first)
        # the flow of diag(2, -1, -1) increases its own weight
        assert first > 0
