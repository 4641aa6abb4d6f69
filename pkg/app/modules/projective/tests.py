"""
Tests para el módulo projective

Cubre:
- Proyectores de rango uno y Hamiltonianos (invariancia de escala)
- Campo fundamental, norma FS y forma simpléctica
- Acción de GL(n+1) y equivariancia unitaria
- Base ortonormal de matrices hermíticas sin traza
"""

import numpy as np
import pytest
from scipy.stats import unitary_group

from app.common.exceptions import InconsistentTangentError, InvalidPointError
from app.modules.projective.schemas import GroupElement, HermitianMatrix, ProjPoint, TangentVector
from app.modules.projective.service import (
    act,
    batch_gradient,
    batch_hamiltonian,
    basis_dimension,
    from_hermitian_coordinates,
    fs_inner,
    fs_norm_sq,
    fs_symplectic,
    fundamental_vector_field,
    hamiltonian,
    hermitian_coordinates,
    rank_one_projector,
    traceless_hermitian_basis,
    unitary_vector_field,
)


# ===== FIXTURES =====

@pytest.fixture
def rng():
    return np.random.default_rng(7)


def random_point(rng, size):
    return ProjPoint(coords=rng.normal(size=size) + 1j * rng.normal(size=size))


def random_traceless(rng, size):
    raw = rng.normal(size=(size, size)) + 1j * rng.normal(size=(size, size))
    hermitian = 0.5 * (raw + raw.conj().T)
    return HermitianMatrix(entries=hermitian - np.trace(hermitian).real / size * np.eye(size))


def random_tangent(rng, z: ProjPoint):
    raw = rng.normal(size=z.coords.size) + 1j * rng.normal(size=z.coords.size)
    ambient = raw - np.vdot(z.coords, raw) / z.norm_sq * z.coords
    ambient = ambient - np.vdot(z.coords, ambient) / z.norm_sq * z.coords
    return TangentVector(base=z, ambient=ambient)


# ===== TESTS: TIPOS =====

class TestDomainTypes:
    """Validaciones de construcción"""

    def test_zero_point_rejected(self):
        with pytest.raises(InvalidPointError):
            ProjPoint(coords=[0, 0, 0])

    def test_non_finite_point_rejected(self):
        with pytest.raises(InvalidPointError):
            ProjPoint(coords=[1, np.nan])

    def test_pairs_parsed_as_complex(self):
        point = ProjPoint(coords=[[1.0, 0.0], [0.0, 2.0]])
        assert np.allclose(point.coords, [1, 2j])

    def test_hermitian_symmetrized(self):
        matrix = HermitianMatrix(entries=[[1, 2], [0, 3]])
        assert np.allclose(matrix.entries, matrix.entries.conj().T)

    def test_tangent_must_be_orthogonal(self):
        with pytest.raises(InconsistentTangentError):
            TangentVector(base=ProjPoint(coords=[1, 0]), ambient=[1, 1])

    def test_singular_group_element_rejected(self):
        with pytest.raises(ValueError):
            GroupElement(matrix=[[1, 2], [2, 4]])

    def test_arrays_are_read_only(self):
        point = ProjPoint(coords=[1, 2])
        with pytest.raises(ValueError):
            point.coords[0] = 5


# ===== TESTS: PROYECTORES Y HAMILTONIANOS =====

class TestRankOneProjector:
    """Proyector z z* / |z|^2"""

    def test_coordinate_point(self):
        P = rank_one_projector(ProjPoint(coords=[1, 0, 0]))
        expected = np.zeros((3, 3))
        expected[0, 0] = 1
        assert np.allclose(P.entries, expected)

    def test_symmetric_point(self):
        P = rank_one_projector(ProjPoint(coords=[1, 1]))
        assert np.allclose(P.entries, 0.5)

    @pytest.mark.parametrize("n", [1, 2, 3, 4])
    def test_root_of_unity_vector(self, n):
        zeta = np.exp(2j * np.pi / (n + 2))
        v = zeta ** np.arange(n + 1)
        P = rank_one_projector(ProjPoint(coords=v))
        a, b = np.meshgrid(np.arange(n + 1), np.arange(n + 1), indexing="ij")
        assert np.allclose(P.entries, zeta ** (a - b) / (n + 1), atol=1e-14)

    def test_zero_vector_raises(self):
        with pytest.raises(InvalidPointError):
            rank_one_projector(np.zeros(2))

    def test_rescale_invariance(self, rng):
        for _ in range(20):
            z = random_point(rng, 4)
            c = complex(rng.normal(), rng.normal())
            scaled = ProjPoint(coords=c * z.coords)
            assert np.max(np.abs(rank_one_projector(z).entries - rank_one_projector(scaled).entries)) < 1e-14

    def test_trace_one_rank_one(self, rng):
        P = rank_one_projector(random_point(rng, 5))
        assert abs(P.trace - 1) < 1e-14
        assert np.linalg.matrix_rank(P.entries, tol=1e-10) == 1


class TestHamiltonian:
    """h_A(z) = z*Az / |z|^2"""

    def test_identity_is_one(self, rng):
        assert hamiltonian(np.eye(3), random_point(rng, 3)) == pytest.approx(1.0)

    def test_balanced_weights(self):
        assert hamiltonian(np.diag([1, -1]), ProjPoint(coords=[1, 1])) == pytest.approx(0.0, abs=1e-15)

    def test_eigenvector(self):
        assert hamiltonian(np.diag([1, -1]), ProjPoint(coords=[1, 0])) == pytest.approx(1.0)

    def test_range_and_rescaling(self, rng):
        for _ in range(20):
            A = random_traceless(rng, 3)
            z = random_point(rng, 3)
            value = hamiltonian(A, z)
            eigenvalues = A.eigenvalues()
            assert eigenvalues[0] - 1e-12 <= value <= eigenvalues[-1] + 1e-12
            assert abs(hamiltonian(A, ProjPoint(coords=(2 - 3j) * z.coords)) - value) < 1e-14

    def test_batch_matches_pointwise(self, rng):
        A = random_traceless(rng, 3)
        coords = np.stack([random_point(rng, 3).coords for _ in range(5)])
        expected = [hamiltonian(A, row) for row in coords]
        assert np.allclose(batch_hamiltonian(A, coords), expected, atol=1e-14)


# ===== TESTS: CAMPOS Y METRICA FS =====

class TestVectorFields:
    """Campo fundamental, norma FS, forma simpléctica"""

    def test_identity_gives_zero_field(self, rng):
        field = fundamental_vector_field(np.eye(3), random_point(rng, 3))
        assert np.allclose(field.ambient, 0, atol=1e-14)

    def test_fixed_point_gives_zero_field(self):
        field = fundamental_vector_field(np.diag([1, -1]), ProjPoint(coords=[1, 0]))
        assert np.allclose(field.ambient, 0)
        assert fs_norm_sq(field) == 0

    def test_lift_at_symmetric_point(self):
        field = fundamental_vector_field(np.diag([1, -1]), ProjPoint(coords=[1, 1]))
        assert np.allclose(field.ambient, [1, -1])

    def test_norm_of_gradient(self):
        field = fundamental_vector_field(np.diag([1, -1]), ProjPoint(coords=[1, 1]))
        assert fs_norm_sq(field) == pytest.approx(2.0)

    def test_norm_matches_finite_difference(self, rng):
        """|grad h|^2 = dh(grad h), medido con diferencias centradas"""
        step = 1e-5
        for _ in range(10):
            A = random_traceless(rng, 3)
            z = random_point(rng, 3)
            field = fundamental_vector_field(A, z)
            forward = hamiltonian(A, z.coords + step * field.ambient)
            backward = hamiltonian(A, z.coords - step * field.ambient)
            derivative = (forward - backward) / (2 * step)
            assert derivative == pytest.approx(fs_norm_sq(field), rel=1e-6)

    def test_quadratic_homogeneity(self, rng):
        z = random_point(rng, 3)
        v = random_tangent(rng, z)
        scaled = TangentVector(base=z, ambient=3 * v.ambient)
        assert fs_norm_sq(scaled) == pytest.approx(9 * fs_norm_sq(v))

    def test_zero_iff_eigenvector(self):
        A = np.diag([2.0, -0.5, -1.5])
        for k in range(3):
            point = ProjPoint(coords=np.eye(3)[k])
            assert fs_norm_sq(fundamental_vector_field(A, point)) == 0
        assert fs_norm_sq(fundamental_vector_field(A, ProjPoint(coords=[1, 1, 0]))) > 0

    def test_hamiltonian_identity(self, rng):
        """dh_A(v) = -omega(J grad h_A, v) = g(grad h_A, v)"""
        step = 1e-5
        for _ in range(20):
            A = random_traceless(rng, 4)
            z = random_point(rng, 4)
            v = random_tangent(rng, z)
            derivative = (hamiltonian(A, z.coords + step * v.ambient)
                          - hamiltonian(A, z.coords - step * v.ambient)) / (2 * step)
            pairing = -fs_symplectic(unitary_vector_field(A, z), v)
            assert derivative == pytest.approx(pairing, rel=1e-6, abs=1e-9)
            assert fs_inner(fundamental_vector_field(A, z), v) == pytest.approx(pairing, rel=1e-12, abs=1e-14)

    def test_unitary_equivariance(self, rng):
        for seed in range(10):
            k = unitary_group.rvs(3, random_state=seed)
            A = random_traceless(rng, 3)
            z = random_point(rng, 3)
            moved = fundamental_vector_field(k @ A.entries @ k.conj().T, act(k, z))
            original = fundamental_vector_field(A, z)
            assert np.max(np.abs(moved.ambient - k @ original.ambient)) < 1e-12

    def test_batch_gradient(self, rng):
        A = random_traceless(rng, 3)
        points = [random_point(rng, 3) for _ in range(4)]
        lifts, grad_sq = batch_gradient(A, np.stack([p.coords for p in points]))
        for point, lift, value in zip(points, lifts, grad_sq):
            field = fundamental_vector_field(A, point)
            assert np.allclose(lift, field.ambient, atol=1e-12)
            assert value == pytest.approx(fs_norm_sq(field), rel=1e-12)


# ===== TESTS: ACCION =====

class TestAction:
    """[g . z]"""

    def test_identity(self, rng):
        z = random_point(rng, 3)
        assert act(GroupElement.identity(3), z).equivalent(z)

    def test_diagonal(self):
        assert act(np.diag([2, 1]), ProjPoint(coords=[1, 1])).equivalent(ProjPoint(coords=[2, 1]))

    def test_swap(self):
        swap = np.array([[0, 1], [1, 0]])
        assert act(swap, ProjPoint(coords=[1, 0])).equivalent(ProjPoint(coords=[0, 1]))

    def test_composition(self, rng):
        g1 = GroupElement(matrix=rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3)))
        g2 = GroupElement(matrix=rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3)))
        z = random_point(rng, 3)
        assert act(g1, act(g2, z)).equivalent(act(g1.compose(g2), z))


# ===== TESTS: BASE HERMITIANA =====

class TestTracelessBasis:
    """Base ortonormal de su(n+1) en la imagen hermítica"""

    @pytest.mark.parametrize("n", [1, 2, 3, 5])
    def test_gram_is_identity(self, n):
        basis = traceless_hermitian_basis(n)
        assert len(basis) == basis_dimension(n) == (n + 1) ** 2 - 1
        gram = np.array([[a.pair(b) for b in basis] for a in basis])
        assert np.max(np.abs(gram - np.eye(len(basis)))) < 1e-14

    @pytest.mark.parametrize("n", [1, 2, 4])
    def test_traceless(self, n):
        assert all(abs(element.trace) < 1e-15 for element in traceless_hermitian_basis(n))

    def test_pauli_type_for_n_one(self):
        basis = traceless_hermitian_basis(1)
        s = 1 / np.sqrt(2)
        assert np.allclose(basis[0].entries, [[0, s], [s, 0]])
        assert np.allclose(basis[1].entries, [[0, -1j * s], [1j * s, 0]])
        assert np.allclose(basis[2].entries, [[s, 0], [0, -s]])

    def test_rejects_n_zero(self):
        with pytest.raises(ValueError):
            traceless_hermitian_basis(0)

    def test_coordinates_round_trip(self, rng):
        A = random_traceless(rng, 4)
        coefficients = hermitian_coordinates(A)
        assert np.allclose(from_hermitian_coordinates(coefficients, 3).entries, A.entries, atol=1e-13)
