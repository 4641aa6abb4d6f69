"""
Tests para el módulo integration

Cubre:
- Validación de esquemas (puntos de base, rango, multiplicidades)
- Densidad FS de curvas racionales
- Cuadratura de dos cartas: volumen 2*pi*d, convergencia, invariancia GL
- Medida de conteo sobre esquemas de puntos
- Muestreo y pertenencia de puntos a curvas
"""

import numpy as np
import pytest

from app.common.exceptions import ConfigurationError, DegenerateParametrizationError
from app.modules.integration.schemas import CurveScheme, PointScheme, QuadratureGrid
from app.modules.integration.service import (
    curve_contains_point,
    fs_density,
    integrate,
    integrate_curve,
    integrate_points,
    pointwise,
    projective_line,
    rational_normal_curve,
    sample_chart,
    sample_curve_points,
    transform_scheme,
    volume,
)
from app.modules.projective.schemas import ProjPoint
from app.modules.projective.service import hamiltonian, rank_one_projector


# ===== TESTS: ESQUEMAS =====

class TestSchemes:
    """Construcción y validación de esquemas"""

    def test_default_multiplicities(self):
        scheme = PointScheme(points=[[1, 0], [0, 1]])
        assert scheme.multiplicities == [1, 1]
        assert scheme.mass == 2

    def test_multiplicities_must_be_positive(self):
        with pytest.raises(ValueError):
            PointScheme(points=[[1, 0]], multiplicities=[0])

    def test_empty_point_scheme_rejected(self):
        with pytest.raises(ValueError):
            PointScheme(points=[])

    def test_mixed_dimensions_rejected(self):
        with pytest.raises(ValueError):
            PointScheme(points=[[1, 0], [1, 0, 0]])

    def test_base_point_rejected(self):
        # Z(u) = (u, u^2) vanishes at u = 0
        with pytest.raises(DegenerateParametrizationError):
            CurveScheme(degree=2, components=[[0, 1, 0], [0, 0, 1]])

    def test_base_point_at_infinity_rejected(self):
        with pytest.raises(DegenerateParametrizationError):
            CurveScheme(degree=2, components=[[1, 0, 0], [0, 1, 0]])

    def test_constant_curve_rejected(self):
        with pytest.raises(DegenerateParametrizationError):
            CurveScheme(degree=1, components=[[1, 1], [2, 2]])

    def test_wrong_coefficient_count_rejected(self):
        with pytest.raises(ValueError):
            CurveScheme(degree=2, components=[[1, 0], [0, 1]])

    def test_coefficient_pairs(self):
        curve = CurveScheme(degree=1, components=[[[1, 0], [0, 0]], [[0, 0], [0, 1]]])
        assert np.allclose(curve.components, [[1, 0], [0, 1j]])

    def test_empty_grid_rejected(self):
        with pytest.raises(ConfigurationError):
            QuadratureGrid(radial_order=0, angular_order=8)

    def test_grid_weights_positive(self, grid):
        assert grid.nodes.size == grid.nodes_per_chart == 32 * 64
        assert np.all(grid.weights > 0)
        assert np.all(np.abs(grid.nodes) <= 1)
        # area of the unit disk
        assert np.sum(grid.weights) == pytest.approx(np.pi, rel=1e-13)


# ===== TESTS: DENSIDAD FS =====

class TestFsDensity:
    """rho(u) del pullback de omega_FS"""

    def test_line_at_origin(self):
        assert fs_density(projective_line(), 0, 0) == pytest.approx(2.0)

    def test_line_profile(self):
        for u in [0.3, 0.5 + 0.5j, -0.9j]:
            assert fs_density(projective_line(), 0, u) == pytest.approx(2 / (1 + abs(u) ** 2) ** 2, rel=1e-13)

    def test_conic_at_origin(self, conic):
        assert fs_density(conic, 0, 0) == pytest.approx(4.0)

    def test_conic_profile(self, conic):
        u = 0.4 - 0.2j
        assert fs_density(conic, 1, u) == pytest.approx(4 / (1 + abs(u) ** 2) ** 2, rel=1e-13)

    def test_base_point_evaluation_raises(self):
        degenerate = CurveScheme.model_construct(
            type="curve", degree=2, components=np.array([[0, 1, 0], [0, 0, 1]], dtype=complex)
        )
        with pytest.raises(DegenerateParametrizationError):
            fs_density(degenerate, 0, 0)

    def test_positivity_random_curves(self):
        rng = np.random.default_rng(11)
        small_grid = QuadratureGrid(radial_order=4, angular_order=8)
        for _ in range(200):
            components = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
            curve = CurveScheme(degree=2, components=components)
            for chart in (0, 1):
                assert np.all(sample_chart(curve, small_grid, chart).density >= 0)


# ===== TESTS: CUADRATURA =====

class TestCurveQuadrature:
    """Integrales sobre curvas racionales"""

    def test_line_area(self, grid):
        assert volume(projective_line(), grid) == pytest.approx(2 * np.pi, rel=1e-10)

    @pytest.mark.parametrize("degree", [1, 2, 3, 4, 5])
    def test_rational_normal_curve_area(self, grid, degree):
        assert volume(rational_normal_curve(degree), grid) == pytest.approx(2 * np.pi * degree, rel=1e-8)

    def test_constant_hamiltonian_integrand(self, grid, conic):
        value = integrate_curve(conic, grid, pointwise(lambda p: hamiltonian(np.eye(3), p)))
        assert value == pytest.approx(volume(conic, grid), rel=1e-12)

    def test_matrix_valued_integrand(self, grid, conic):
        moment = integrate_curve(conic, grid, pointwise(rank_one_projector))
        assert np.allclose(moment, 4 * np.pi / 3 * np.eye(3), atol=1e-9)

    @pytest.mark.parametrize("degree", [2, 3, 5])
    def test_radial_refinement(self, degree):
        exact = 2 * np.pi * degree
        errors = [
            abs(volume(rational_normal_curve(degree), QuadratureGrid(radial_order=m, angular_order=16)) - exact)
            for m in (2, 4, 8)
        ]
        assert errors[1] <= errors[0] / 3.5
        assert errors[2] <= errors[1] / 3.5

    def test_chart_consistency(self, grid):
        rng = np.random.default_rng(3)
        components = rng.normal(size=(3, 4)) + 1j * rng.normal(size=(3, 4))
        curve = CurveScheme(degree=3, components=components)
        swapped = CurveScheme(degree=3, components=components[:, ::-1])
        assert abs(volume(curve, grid) - volume(swapped, grid)) < 1e-12 * volume(curve, grid)

    def test_gl_invariance(self, conic):
        fine = QuadratureGrid(radial_order=48, angular_order=128)
        rng = np.random.default_rng(5)
        perturbation = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        g = np.eye(3) + 0.2 * perturbation / np.linalg.norm(perturbation, 2)
        assert np.linalg.cond(g) < 10
        moved = transform_scheme(g, conic)
        assert volume(moved, fine) == pytest.approx(4 * np.pi, rel=1e-6)

    def test_deterministic(self, grid, conic):
        first = integrate_curve(conic, grid, pointwise(rank_one_projector))
        second = integrate_curve(conic, grid, pointwise(rank_one_projector), n_jobs=1)
        assert np.array_equal(first, second)

    def test_graded_panels_resolve_concentration(self):
        graded = QuadratureGrid(radial_order=24, angular_order=16, panels=6)
        assert np.sum(graded.weights) == pytest.approx(np.pi, rel=1e-13)
        assert graded.nodes.size == graded.nodes_per_chart == 24 * 6 * 16
        squeezed = projective_line().transformed(np.diag([1.0, 1e-4]))
        assert volume(squeezed, graded) == pytest.approx(2 * np.pi, rel=1e-8)

    def test_invalid_grading_rejected(self):
        with pytest.raises(ConfigurationError):
            QuadratureGrid(panels=3, grading=1.5)


# ===== TESTS: ESQUEMAS DE PUNTOS =====

class TestPointIntegration:
    """Medida de conteo"""

    def test_constant_is_mass(self):
        scheme = PointScheme(points=[[1, 0], [1, 1]], multiplicities=[2, 3])
        assert integrate_points(scheme, lambda p: 1.0) == 5
        assert volume(scheme, QuadratureGrid()) == 5

    def test_double_point(self):
        scheme = PointScheme(points=[[1, 0]], multiplicities=[2])
        moment = integrate_points(scheme, rank_one_projector)
        assert np.allclose(moment, [[2, 0], [0, 0]])

    def test_dispatch_matches_per_type_rules(self, grid, conic):
        scheme = PointScheme(points=[[1, 0], [1, 1]], multiplicities=[2, 3])
        projector = pointwise(rank_one_projector)
        assert np.allclose(integrate(scheme, grid, projector), integrate_points(scheme, rank_one_projector))
        assert np.array_equal(integrate(conic, grid, projector), integrate_curve(conic, grid, projector))

    @pytest.mark.parametrize("n", [1, 2, 3, 5])
    def test_roots_of_unity_moment(self, roots_of_unity, n):
        moment = integrate_points(roots_of_unity(n), rank_one_projector)
        assert np.max(np.abs(moment - (n + 2) / (n + 1) * np.eye(n + 1))) < 1e-12


# ===== TESTS: MUESTREO =====

class TestCurveSampling:
    """Puntos sobre la imagen de una curva"""

    def test_single_sample_on_curve(self, conic):
        (point,) = sample_curve_points(conic, 1, seed=0)
        z = point.coords
        # image of the conic: z_1^2 = 2 z_0 z_2
        assert abs(z[1] ** 2 - 2 * z[0] * z[2]) < 1e-12 * np.vdot(z, z).real
        assert curve_contains_point(conic, point)

    def test_line_samples(self):
        points = sample_curve_points(projective_line(), 4, seed=1)
        assert len(points) == 4
        for point in points:
            assert abs(point.coords[0]) == 1 or abs(point.coords[1]) == 1

    def test_deterministic(self, conic):
        first = sample_curve_points(conic, 5, seed=42)
        second = sample_curve_points(conic, 5, seed=42)
        assert all(np.array_equal(a.coords, b.coords) for a, b in zip(first, second))

    def test_count_must_be_positive(self, conic):
        with pytest.raises(ValueError):
            sample_curve_points(conic, 0, seed=0)

    def test_contains_point(self):
        line = projective_line(2)
        assert curve_contains_point(line, ProjPoint(coords=[1, 2, 0]))
        assert curve_contains_point(line, ProjPoint(coords=[0, 1, 0]))
        assert not curve_contains_point(line, ProjPoint(coords=[0, 0, 1]))
        assert not curve_contains_point(line, ProjPoint(coords=[1, 1, 1]))
