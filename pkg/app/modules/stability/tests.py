"""
Tests para el módulo stability

Cubre:
- Posición general y búsqueda greedy de subconjuntos
- Configuración de raíces de la unidad
- Criterio de conteo de subespacios y pesos de Chow
- Equivalencia entre ambos criterios sobre esquemas aleatorios
- Estimación numérica del peso de Chow de curvas
"""

import numpy as np
import pytest
from scipy.stats import unitary_group

from app.common.exceptions import ConfigurationError, DegenerateSourceError
from app.modules.integration.schemas import PointScheme
from app.modules.integration.service import projective_line, rational_normal_curve
from app.modules.moment_map.service import balanced_check, moment_matrix
from app.modules.projective.schemas import ProjPoint
from app.modules.stability.curves import chow_weight_curve_estimate, curve_is_invariant
from app.modules.stability.schemas import StabilityStatus, WeightVector
from app.modules.stability.service import (
    chow_stability_sampled,
    chow_weight_points,
    combinatorial_family,
    curve_sampler,
    find_general_position_subset,
    flat_limit_point,
    general_position,
    limit_is_fixed,
    pair_weight,
    point_set_stable,
    roots_of_unity_config,
    stability_margin,
    verify_witness,
)


# ===== FIXTURES =====

@pytest.fixture
def double_point():
    """{[1:0] x 2, [0:1]} in P^1"""
    return PointScheme(points=[[1, 0], [0, 1]], multiplicities=[2, 1])


@pytest.fixture
def three_on_a_line():
    return PointScheme(points=[[1, 0, 0], [0, 1, 0], [1, 1, 0], [0, 0, 1]])


@pytest.fixture
def antipodal_pair():
    return PointScheme(points=[[1, 0], [0, 1]])


def lam(*weights):
    return WeightVector(weights=list(weights))


def random_integer_scheme(rng, n):
    """Small integer coordinates: coincidences and collinearities happen often."""
    count = int(rng.integers(n + 2, 2 * n + 3))
    points = []
    while len(points) < count:
        coords = rng.integers(-1, 3, size=n + 1)
        if np.any(coords != 0):
            points.append(coords.astype(float))
    multiplicities = [int(m) for m in rng.choice([1, 1, 1, 2], size=count)]
    return PointScheme(points=points, multiplicities=multiplicities)


def engineered_unstable(rng, n):
    """Most of the mass on one point or one line."""
    heavy = rng.normal(size=n + 1) + 1j * rng.normal(size=n + 1)
    others = [rng.normal(size=n + 1) + 1j * rng.normal(size=n + 1) for _ in range(n + 1)]
    return PointScheme(points=[heavy] + others, multiplicities=[n + 2] + [1] * (n + 1))


# ===== TESTS: POSICIÓN GENERAL =====

class TestGeneralPosition:
    """Todo subconjunto de n+1 puntos es independiente"""

    @pytest.mark.parametrize("n", [1, 2, 3, 4])
    def test_roots_of_unity(self, n):
        assert general_position(roots_of_unity_config(n).points)

    def test_point_on_coordinate_line(self):
        assert not general_position([[1, 0, 0], [0, 1, 0], [0, 0, 1], [1, 1, 0]])

    def test_standard_frame(self):
        assert general_position([[1, 0, 0], [0, 1, 0], [0, 0, 1], [1, 1, 1]])

    def test_repeated_point(self):
        assert not general_position([[1, 0], [2, 0], [0, 1]])

    def test_short_lists_need_independence(self):
        assert general_position([[1, 0, 0], [0, 1, 0]])
        assert not general_position([[1, 1, 0], [2, 2, 0]])


class TestGeneralPositionSubset:
    """Búsqueda greedy a partir de un muestreador"""

    def test_rational_normal_curve(self):
        for n in (1, 2, 3):
            subset = find_general_position_subset(curve_sampler(rational_normal_curve(n)), n, seed=1)
            assert len(subset.points) == n + 2
            assert general_position(subset.points)

    def test_hyperplane_source_fails(self):
        def planar(rng):
            return ProjPoint(coords=[complex(*rng.normal(size=2)), complex(*rng.normal(size=2)), 0])

        with pytest.raises(DegenerateSourceError):
            find_general_position_subset(planar, 2, budget=50)

    def test_deterministic(self, conic):
        first = find_general_position_subset(curve_sampler(conic), 2, seed=7)
        second = find_general_position_subset(curve_sampler(conic), 2, seed=7)
        assert all(np.array_equal(a.coords, b.coords) for a, b in zip(first.points, second.points))

    def test_wrong_dimension_rejected(self):
        with pytest.raises(ValueError):
            find_general_position_subset(lambda rng: ProjPoint(coords=[1, rng.normal()]), 2)


class TestRootsOfUnityConfig:
    """v_b = [1 : z^b : ... : z^nb]"""

    def test_projective_line(self):
        E = roots_of_unity_config(1)
        zeta = np.exp(2j * np.pi / 3)
        assert len(E.points) == 3
        for b, point in enumerate(E.points):
            assert np.allclose(point.coords, [1, zeta ** b])
        assert E.multiplicities == [1, 1, 1]

    @pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
    def test_moment_matrix(self, grid, n):
        moment = moment_matrix(roots_of_unity_config(n), grid)
        assert np.max(np.abs(moment.matrix.entries - (n + 2) / (n + 1) * np.eye(n + 1))) < 1e-12

    def test_n_must_be_positive(self):
        with pytest.raises(ValueError):
            roots_of_unity_config(0)


# ===== TESTS: CRITERIO DE CONTEO =====

class TestCountingCriterion:
    """#(P & D) < N (dim P + 1) / (n + 1)"""

    @pytest.mark.parametrize("n", [1, 2, 3, 4])
    def test_roots_of_unity_stable(self, n):
        verdict = point_set_stable(roots_of_unity_config(n))
        assert verdict.status == StabilityStatus.STABLE
        # a subspace spanned by r of the points contains exactly r of them
        assert verdict.margin == pytest.approx(1 / (n + 1))
        assert verdict.subspace is None

    def test_margin_per_unit_mass(self, double_point, antipodal_pair):
        assert stability_margin(roots_of_unity_config(2)) == pytest.approx(1 / 12)
        assert stability_margin(double_point) == pytest.approx(-1 / 6)
        assert stability_margin(antipodal_pair) == 0

    def test_double_point(self, double_point):
        verdict = point_set_stable(double_point)
        assert verdict.status == StabilityStatus.UNSTABLE
        assert verdict.subspace.indices == [0]
        assert verdict.subspace.count == 2
        assert verdict.subspace.bound == pytest.approx(1.5)
        assert verify_witness(double_point, verdict)

    def test_three_on_a_line(self, three_on_a_line):
        verdict = point_set_stable(three_on_a_line)
        assert verdict.status == StabilityStatus.UNSTABLE
        assert verdict.subspace.dimension == 1
        assert verdict.subspace.count == 3
        assert verdict.subspace.bound == pytest.approx(8 / 3)
        assert verify_witness(three_on_a_line, verdict)

    def test_antipodal_pair_is_boundary(self, antipodal_pair):
        verdict = point_set_stable(antipodal_pair)
        assert verdict.status == StabilityStatus.BOUNDARY
        assert verdict.margin == 0

    def test_single_point(self):
        assert point_set_stable(PointScheme(points=[[1, 2, 3]])).status == StabilityStatus.UNSTABLE

    def test_hyperplane_configuration(self):
        D = PointScheme(points=[[1, 0, 0], [0, 1, 0], [1, 1, 0], [1, 2, 0], [2, 1, 0]])
        verdict = point_set_stable(D)
        assert verdict.status == StabilityStatus.UNSTABLE
        assert verdict.subspace.count == 5

    def test_scaled_duplicates_merge(self):
        D = PointScheme(points=[[1, 0], [3j, 0], [0, 1]])
        assert point_set_stable(D).status == StabilityStatus.UNSTABLE

    def test_balanced_configurations_not_unstable(self, grid, roots_of_unity):
        for seed in range(5):
            k = unitary_group.rvs(3, random_state=seed)
            moved = roots_of_unity(2).transformed(k)
            balanced, _ = balanced_check(None, moved, grid, tol=1e-9)
            assert balanced
            assert point_set_stable(moved).status == StabilityStatus.STABLE
        # an orthonormal basis is balanced but only polystable
        basis = PointScheme(points=np.eye(3))
        assert balanced_check(None, basis, grid, tol=1e-9)[0]
        assert point_set_stable(basis).status == StabilityStatus.BOUNDARY


# ===== TESTS: LÍMITES PLANOS Y PESOS =====

class TestFlatLimit:
    """lim diag(s^w) p"""

    def test_minimum_weight_dominates(self):
        limit = flat_limit_point(ProjPoint(coords=[1, 1, 1]), lam(-1, 0, 1))
        assert limit.equivalent(ProjPoint(coords=[1, 0, 0]))

    def test_tie_on_support(self):
        limit = flat_limit_point(ProjPoint(coords=[0, 1, 1]), lam(-1, 0.5, 0.5))
        assert limit.equivalent(ProjPoint(coords=[0, 1, 1]))

    def test_projective_line(self):
        limit = flat_limit_point(ProjPoint(coords=[1, 1]), lam(1, -1))
        assert limit.equivalent(ProjPoint(coords=[0, 1]))

    def test_keeps_values(self):
        limit = flat_limit_point(ProjPoint(coords=[2, 3j, 5]), lam(0, 0, 0))
        assert np.array_equal(limit.coords, [2, 3j, 5])


class TestChowWeight:
    """w(D, lambda) = - sum mult * h(lim p)"""

    def test_roots_of_unity_on_line(self):
        assert chow_weight_points(roots_of_unity_config(1), lam(1, -1)) == pytest.approx(3.0)

    def test_double_point_exact(self, double_point):
        assert chow_weight_points(double_point, lam(1, -1)) == -1.0

    def test_homogeneity(self):
        rng = np.random.default_rng(0)
        D = random_integer_scheme(rng, 2)
        weights = lam(2, -0.5, -1.5)
        for c in (0.5, 2.0, 7.0):
            assert chow_weight_points(D, weights.scaled(c)) == pytest.approx(c * chow_weight_points(D, weights))

    @pytest.mark.parametrize("n", [1, 2, 3, 4])
    def test_calibration_on_roots_of_unity(self, n):
        E = roots_of_unity_config(n)
        family = combinatorial_family(E)
        assert family
        for weights, frame in family:
            assert chow_weight_points(E, weights, frame) > 0

    def test_permutation_equivariance(self):
        rng = np.random.default_rng(4)
        D = PointScheme(points=[rng.normal(size=3) + 1j * rng.normal(size=3) for _ in range(5)])
        permutation = [2, 0, 1]
        k = np.zeros((3, 3))
        for i, j in enumerate(permutation):
            k[j, i] = 1
        weights = lam(1, 2, -3)
        moved = chow_weight_points(D.transformed(k), weights.permuted(permutation))
        assert moved == pytest.approx(chow_weight_points(D, weights))

    def test_frame_is_change_of_coordinates(self):
        rng = np.random.default_rng(8)
        D = PointScheme(points=[rng.normal(size=3) + 1j * rng.normal(size=3) for _ in range(4)])
        frame = unitary_group.rvs(3, random_state=3)
        weights = lam(1, 1, -2)
        assert chow_weight_points(D, weights, frame) == pytest.approx(
            chow_weight_points(D.transformed(frame.conj().T), weights)
        )

    def test_trivial_weights_rejected(self, double_point):
        with pytest.raises(ValueError):
            chow_weight_points(double_point, lam(0, 0))

    def test_weights_must_sum_to_zero(self):
        with pytest.raises(ValueError):
            WeightVector(weights=[1, 1])

    def test_pair_weight(self, double_point):
        E = roots_of_unity_config(1)
        weights = lam(1, -1)
        assert pair_weight(double_point, E, 0.0, weights) == -1.0
        assert pair_weight(double_point, E, 1 / 3, weights) == pytest.approx(0.0)
        assert pair_weight(double_point, E, 1.0, weights) == pytest.approx(2.0)


# ===== TESTS: CRITERIO DE CHOW MUESTREADO =====

class TestSampledStability:
    """Pesos de Chow sobre la familia combinatoria y subgrupos aleatorios"""

    def test_roots_of_unity_stable(self):
        verdict = chow_stability_sampled(roots_of_unity_config(2), samples=16)
        assert verdict.status == StabilityStatus.STABLE
        assert verdict.margin > 0

    def test_three_on_a_line(self, three_on_a_line):
        verdict = chow_stability_sampled(three_on_a_line, samples=16)
        assert verdict.status == StabilityStatus.UNSTABLE
        assert verdict.weight_witness.weight < 0
        assert verify_witness(three_on_a_line, verdict)

    def test_antipodal_pair_is_boundary(self, antipodal_pair):
        verdict = chow_stability_sampled(antipodal_pair, samples=16)
        assert verdict.status == StabilityStatus.BOUNDARY
        assert chow_weight_points(antipodal_pair, lam(1, -1)) == 0
        assert limit_is_fixed(antipodal_pair, lam(1, -1))

    def test_samples_must_be_positive(self, antipodal_pair):
        with pytest.raises(ValueError):
            chow_stability_sampled(antipodal_pair, samples=0)

    def test_deterministic(self, three_on_a_line):
        first = chow_stability_sampled(three_on_a_line, samples=8, seed=3)
        second = chow_stability_sampled(three_on_a_line, samples=8, seed=3)
        assert first.margin == second.margin


class TestCriterionEquivalence:
    """Conteo de subespacios y pesos de Chow coinciden fuera de la frontera"""

    def test_random_schemes(self):
        rng = np.random.default_rng(500)
        compared = 0
        unstable = 0
        stable = 0
        for trial in range(500):
            n = 1 if trial % 2 == 0 else 2
            D = engineered_unstable(rng, n) if trial % 10 == 0 else random_integer_scheme(rng, n)
            counting = point_set_stable(D, n_jobs=1)
            sampled = chow_stability_sampled(D, samples=8, seed=trial, n_jobs=1)
            if abs(counting.margin) <= 1e-9 or abs(sampled.margin) <= 1e-9:
                continue
            compared += 1
            assert (counting.status == StabilityStatus.STABLE) == (sampled.status == StabilityStatus.STABLE)
            if counting.status == StabilityStatus.UNSTABLE:
                unstable += 1
                assert verify_witness(D, counting)
                assert verify_witness(D, sampled)
            elif counting.status == StabilityStatus.STABLE:
                stable += 1
        assert compared > 100
        assert unstable > 20
        assert stable > 20


# ===== TESTS: CURVAS =====

class TestCurveWeightEstimate:
    """W(s) extrapolado a s -> 0"""

    def test_line_is_invariant(self):
        estimate = chow_weight_curve_estimate(projective_line(), lam(1, -1), [0.1, 0.01, 0.001])
        assert estimate.invariant
        assert abs(estimate.estimate) < 1e-8

    def test_torus_fixed_conic(self, conic):
        estimate = chow_weight_curve_estimate(conic, lam(1, 0, -1), [0.2, 0.1, 0.05])
        assert estimate.invariant
        assert abs(estimate.estimate) < 1e-7

    def test_conic_degenerating_to_two_lines(self, conic):
        # the limit is the line z2 = 0 plus the line z0 = 0, with weight pi
        estimate = chow_weight_curve_estimate(conic, lam(1, -1, 0), [0.04, 0.02, 0.01, 0.005])
        assert not estimate.invariant
        assert estimate.estimate > 0
        assert estimate.estimate == pytest.approx(np.pi, rel=1e-2)

    def test_invariance_decided_on_the_curve(self, conic):
        assert curve_is_invariant(conic, lam(1, 0, -1))
        assert curve_is_invariant(rational_normal_curve(3), lam(3, 1, -1, -3))
        assert not curve_is_invariant(conic, lam(1, -1, 0))
        assert not curve_is_invariant(conic, lam(0, 1, -1))

    def test_fast_converging_weight_is_not_invariant(self, conic):
        # W(s) is flat to 4e-7 over these s, yet the limit differs from the conic
        estimate = chow_weight_curve_estimate(conic, lam(1, -1, 0), [0.04, 0.02, 0.01, 0.005])
        assert max(estimate.values) - min(estimate.values) < 1e-6
        assert not estimate.invariant
        assert estimate.estimate == pytest.approx(np.pi, rel=1e-6)

    def test_sign_matches_sampled_points(self, conic):
        weights = lam(1, -1, 0)
        points = find_general_position_subset(curve_sampler(conic), 2, seed=2)
        assert chow_weight_points(points, weights) > 0
        assert chow_weight_curve_estimate(conic, weights, [0.04, 0.02, 0.01]).estimate > 0

    def test_s_values_validated(self, conic):
        with pytest.raises(ConfigurationError):
            chow_weight_curve_estimate(conic, lam(1, -1, 0), [0.01, 0.1])
        with pytest.raises(ConfigurationError):
            chow_weight_curve_estimate(conic, lam(1, -1, 0), [0.1, 1e-5])

    def test_trivial_weights_rejected(self, conic):
        with pytest.raises(ValueError):
            chow_weight_curve_estimate(conic, lam(0, 0, 0), [0.1, 0.05, 0.01])
