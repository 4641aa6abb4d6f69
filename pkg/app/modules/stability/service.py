"""
Stability of point configurations.

Two independent tests are provided. `point_set_stable` counts points of D
(with multiplicity) in every proper subspace P spanned by points of D and
requires #(P & D) < N (dim P + 1) / (n + 1). `chow_stability_sampled`
evaluates the Chow weight

    w(D, lambda) = - sum_p mult(p) * min{lambda_i : p_i != 0}

over the step subgroups adapted to those same subspaces, plus random
subgroups in random unitary frames. With this sign stable configurations
have w > 0 for every nontrivial subgroup.
"""

import logging
from itertools import combinations
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import null_space, orth
from scipy.stats import unitary_group

from app.common.exceptions import DegenerateSourceError
from app.common.parallel import ordered_map
from app.common.validators import numerical_rank
from app.core.config import settings
from app.modules.integration.schemas import CurveScheme, PointScheme
from app.modules.integration.service import sample_curve_points
from app.modules.projective.schemas import ProjPoint
from app.modules.projective.service import hamiltonian
from app.modules.stability.schemas import (
    StabilityStatus,
    StabilityVerdict,
    SubspaceWitness,
    WeightVector,
    WeightWitness,
)

logger = logging.getLogger(__name__)

Sampler = Callable[[np.random.Generator], ProjPoint]

# weights closer than this (relative) are tied
_WEIGHT_TIE = 1e-12


def _coords(point) -> np.ndarray:
    return point.coords if isinstance(point, ProjPoint) else np.asarray(point, dtype=np.complex128)


def _rank_tol(rel_tol: Optional[float]) -> float:
    return settings.RANK_TOL if rel_tol is None else rel_tol


# ===== GENERAL POSITION =====

def general_position(points: Sequence, rel_tol: Optional[float] = None) -> bool:
    """
    Every subset of at most n+1 of the points is linearly independent.

    For n+2 points in P^n this is the usual notion; shorter lists only need
    to be independent.
    """
    vectors = [_coords(p) for p in points]
    if not vectors:
        return True
    size = vectors[0].size
    k = min(len(vectors), size)
    tol = _rank_tol(rel_tol)
    for subset in combinations(range(len(vectors)), k):
        if numerical_rank([vectors[i] for i in subset], rel_tol=tol) < k:
            return False
    return True


def find_general_position_subset(
    sampler: Sampler,
    n: int,
    budget: int = 1000,
    seed: int = 0,
) -> PointScheme:
    """
    Greedily draw n+2 points in general position.

    Args:
        sampler: callable drawing one ProjPoint of P^n from a numpy Generator
        n: projective dimension
        budget: maximum number of draws
        seed: seed of the generator handed to the sampler

    Returns:
        PointScheme with n+2 points in general position

    Raises:
        DegenerateSourceError: the budget ran out (the source may lie in a hyperplane)
    """
    rng = np.random.default_rng(seed)
    accepted: List[ProjPoint] = []
    for draw in range(budget):
        candidate = sampler(rng)
        if candidate.n != n:
            raise ValueError(f"Sampler produced a point of P^{candidate.n}, expected P^{n}")
        if general_position(accepted + [candidate]):
            accepted.append(candidate)
            if len(accepted) == n + 2:
                logger.debug(f"General position subset found after {draw + 1} draws")
                return PointScheme(points=accepted)
    raise DegenerateSourceError(
        f"Only {len(accepted)} of {n + 2} points in general position after {budget} draws; "
        f"the source may lie in a hyperplane"
    )


def curve_sampler(C: CurveScheme) -> Sampler:
    """Sampler of points on the image of a curve."""
    def draw(rng: np.random.Generator) -> ProjPoint:
        return sample_curve_points(C, 1, seed=int(rng.integers(2 ** 32)))[0]
    return draw


def roots_of_unity_config(n: int) -> PointScheme:
    """E = {[1 : z^b : z^2b : ... : z^nb] : b = 0..n+1} with z = exp(2 pi i / (n+2))."""
    if n < 1:
        raise ValueError("n must be >= 1")
    zeta = np.exp(2j * np.pi / (n + 2))
    powers = np.arange(n + 1)
    return PointScheme(points=[zeta ** (b * powers) for b in range(n + 2)])


# ===== SUBSPACES SPANNED BY THE CONFIGURATION =====

def _support(D: PointScheme, tol: float) -> Tuple[List[np.ndarray], List[List[int]], List[int]]:
    """Distinct points of D with the original indices and summed multiplicities."""
    vectors: List[np.ndarray] = []
    groups: List[List[int]] = []
    masses: List[int] = []
    for index, (point, multiplicity) in enumerate(zip(D.points, D.multiplicities)):
        unit = point.unit()
        for j, existing in enumerate(vectors):
            if numerical_rank([existing, unit], rel_tol=tol) == 1:
                groups[j].append(index)
                masses[j] += multiplicity
                break
        else:
            vectors.append(unit)
            groups.append([index])
            masses.append(multiplicity)
    return vectors, groups, masses


def _members(basis: np.ndarray, vectors: List[np.ndarray], tol: float) -> frozenset:
    """Indices of the unit vectors lying in the column span of the orthonormal `basis`."""
    members = []
    for j, v in enumerate(vectors):
        distance = np.linalg.norm(v - basis @ (basis.conj().T @ v))
        if distance <= tol:
            members.append(j)
    return frozenset(members)


def _spanned_subspaces(D: PointScheme, rel_tol: Optional[float] = None, n_jobs: Optional[int] = None):
    """
    Proper subspaces spanned by points of D, deduplicated.

    Returns:
        (support vectors, support index groups, support masses,
         list of (spanning support indices, rank, member set, orthonormal basis))
    """
    tol = _rank_tol(rel_tol)
    vectors, groups, masses = _support(D, tol)
    size = D.n + 1

    def of_rank(rank: int):
        found = []
        for combo in combinations(range(len(vectors)), rank):
            stacked = np.stack([vectors[i] for i in combo], axis=1)
            if numerical_rank(list(stacked.T), rel_tol=tol) < rank:
                continue
            basis = orth(stacked, rcond=tol)
            found.append((combo, rank, _members(basis, vectors, tol), basis))
        return found

    subspaces = []
    seen = set()
    for found in ordered_map(of_rank, range(1, min(size, len(vectors) + 1)), n_jobs=n_jobs):
        for combo, rank, members, basis in found:
            if members in seen:
                continue
            seen.add(members)
            subspaces.append((combo, rank, members, basis))
    return vectors, groups, masses, subspaces


def point_set_stable(D: PointScheme, rel_tol: Optional[float] = None, n_jobs: Optional[int] = None) -> StabilityVerdict:
    """
    Subspace counting criterion #(P & D) < N (dim P + 1) / (n + 1).

    Counts use multiplicity. The margin is the smallest slack
    N (dim P + 1) / (n + 1) - #(P & D); it is exact because every quantity
    is rational with denominator n + 1.
    """
    _, groups, masses, subspaces = _spanned_subspaces(D, rel_tol, n_jobs)
    total, size = D.mass, D.n + 1
    worst: Optional[SubspaceWitness] = None
    worst_scaled = None
    for combo, rank, members, _ in subspaces:
        count = sum(masses[j] for j in members)
        scaled = total * rank - count * size
        if worst_scaled is None or scaled < worst_scaled:
            worst_scaled = scaled
            worst = SubspaceWitness(
                indices=[groups[j][0] for j in combo],
                dimension=rank - 1,
                count=count,
                bound=total * rank / size,
            )
    if worst is None:
        # a single point of P^n spans no proper subspace only when n = 0
        return StabilityVerdict(status=StabilityStatus.STABLE, margin=float("inf"))
    if worst_scaled < 0:
        status = StabilityStatus.UNSTABLE
    elif worst_scaled == 0:
        status = StabilityStatus.BOUNDARY
    else:
        status = StabilityStatus.STABLE
    verdict = StabilityVerdict(
        status=status,
        subspace=worst if status != StabilityStatus.STABLE else None,
        margin=worst_scaled / size,
        candidates=len(subspaces),
    )
    logger.debug(f"Counting criterion: {status.value}, margin {verdict.margin:.4f} over {len(subspaces)} subspaces")
    return verdict


# ===== ONE-PARAMETER SUBGROUPS =====

def flat_limit_point(p, weights: WeightVector, rel_tol: Optional[float] = None) -> ProjPoint:
    """
    lim_{s -> 0} diag(s^w) . p: keep the coordinates of minimal weight among
    the nonzero ones, zero the rest.
    """
    coords = _coords(p)
    if coords.size != weights.size:
        raise ValueError(f"Point has {coords.size} coordinates, weights have {weights.size}")
    values = weights.array()
    support = np.abs(coords) > _rank_tol(rel_tol) * np.max(np.abs(coords))
    lowest = np.min(values[support])
    keep = support & (values <= lowest + _WEIGHT_TIE * max(1.0, np.max(np.abs(values))))
    return ProjPoint(coords=np.where(keep, coords, 0))


def _in_frame(D: PointScheme, frame: Optional[np.ndarray]) -> np.ndarray:
    coords = D.coordinate_matrix()
    if frame is None:
        return coords
    return coords @ np.asarray(frame).conj()


def chow_weight_points(
    D: PointScheme,
    weights: WeightVector,
    frame: Optional[np.ndarray] = None,
    rel_tol: Optional[float] = None,
) -> float:
    """
    w(D, lambda) = - sum_p mult(p) h_{diag(lambda)}(lim p).

    Args:
        D: point configuration
        weights: nontrivial weights summing to zero
        frame: unitary matrix whose columns are the eigenvectors of the
            subgroup (None = standard coordinates)

    Returns:
        The Chow weight; positive for every nontrivial subgroup iff D is stable
    """
    if weights.is_trivial:
        raise ValueError("Chow weights need a nontrivial weight vector")
    generator = weights.matrix()
    total = 0.0
    for coords, multiplicity in zip(_in_frame(D, frame), D.multiplicities):
        total -= multiplicity * hamiltonian(generator, flat_limit_point(coords, weights, rel_tol))
    return float(total)


def limit_is_fixed(D: PointScheme, weights: WeightVector, frame: Optional[np.ndarray] = None, rel_tol: Optional[float] = None) -> bool:
    """True when every point of D is its own flat limit (D_0 = D)."""
    for coords in _in_frame(D, frame):
        limit = flat_limit_point(coords, weights, rel_tol)
        if not ProjPoint(coords=coords).equivalent(limit):
            return False
    return True


def pair_weight(
    X: PointScheme,
    D: PointScheme,
    t: float,
    weights: WeightVector,
    frame: Optional[np.ndarray] = None,
) -> float:
    """w(X, lambda) + t w(D, lambda), the weight of the pair along the continuity path."""
    return chow_weight_points(X, weights, frame) + t * chow_weight_points(D, weights, frame)


def step_weights(rank: int, size: int) -> WeightVector:
    """+(size - rank) on a rank-dimensional subspace, -rank on its complement."""
    return WeightVector(weights=[float(size - rank)] * rank + [-float(rank)] * (size - rank))


def subspace_frame(basis: np.ndarray) -> np.ndarray:
    """Unitary frame whose first columns span `basis`, the rest its orthogonal complement."""
    return np.hstack([basis, null_space(basis.conj().T)])


def combinatorial_family(D: PointScheme, rel_tol: Optional[float] = None, n_jobs: Optional[int] = None) -> List[Tuple[WeightVector, np.ndarray]]:
    """Step subgroups adapted to every proper subspace spanned by points of D."""
    *_, subspaces = _spanned_subspaces(D, rel_tol, n_jobs)
    size = D.n + 1
    return [(step_weights(rank, size), subspace_frame(basis)) for _, rank, _, basis in subspaces]


def _random_family(size: int, samples: int, seed: int) -> List[Tuple[WeightVector, np.ndarray]]:
    rng = np.random.default_rng(seed)
    family = []
    while len(family) < samples:
        frame = unitary_group.rvs(size, random_state=rng)
        integers = rng.integers(-3, 4, size=size)
        if np.all(integers == integers[0]):
            continue
        family.append((WeightVector.centered(integers), frame))
    return family


def chow_stability_sampled(
    D: PointScheme,
    samples: int = 32,
    seed: int = 0,
    tol: float = 1e-9,
    n_jobs: Optional[int] = None,
    rel_tol: Optional[float] = None,
) -> StabilityVerdict:
    """
    Chow weights over the combinatorial family and `samples` random subgroups.

    Unstable iff some weight is <= 0 with a limit different from D; a zero
    weight whose limit is D itself is reported as the boundary case.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    family = combinatorial_family(D, rel_tol=rel_tol, n_jobs=n_jobs) + _random_family(D.n + 1, samples, seed)

    def evaluate(candidate):
        weights, frame = candidate
        return chow_weight_points(D, weights, frame, rel_tol), limit_is_fixed(D, weights, frame, rel_tol)

    results = ordered_map(evaluate, family, n_jobs=n_jobs)
    status = StabilityStatus.STABLE
    witness: Optional[WeightWitness] = None
    margin = float("inf")
    for (weights, frame), (weight, fixed) in zip(family, results):
        scale = tol * D.mass * max(1.0, float(np.max(np.abs(weights.array()))))
        margin = min(margin, weight)
        if weight < -scale or (weight <= scale and not fixed):
            if status != StabilityStatus.UNSTABLE or weight < witness.weight:
                status = StabilityStatus.UNSTABLE
                witness = WeightWitness(weights=weights, frame=frame, weight=weight, fixed=fixed)
        elif weight <= scale and status == StabilityStatus.STABLE:
            status = StabilityStatus.BOUNDARY
            witness = WeightWitness(weights=weights, frame=frame, weight=weight, fixed=fixed)
    logger.debug(f"Sampled Chow stability: {status.value}, smallest weight {margin:.4f} over {len(family)} subgroups")
    return StabilityVerdict(status=status, weight_witness=witness, margin=margin, candidates=len(family))


def verify_witness(D: PointScheme, verdict: StabilityVerdict, tol: float = 1e-9, rel_tol: Optional[float] = None) -> bool:
    """Re-evaluate the criterion on the verdict's witness and confirm the violation."""
    if verdict.subspace is not None:
        spanning = np.stack([D.points[i].unit() for i in verdict.subspace.indices], axis=1)
        rank_tol = _rank_tol(rel_tol)
        basis = orth(spanning, rcond=rank_tol)
        vectors = [p.unit() for p in D.points]
        members = _members(basis, vectors, rank_tol)
        count = sum(D.multiplicities[j] for j in members)
        return count * (D.n + 1) >= D.mass * basis.shape[1]
    if verdict.weight_witness is not None:
        witness = verdict.weight_witness
        return chow_weight_points(D, witness.weights, witness.frame, rel_tol) <= tol * D.mass * max(1.0, float(np.max(np.abs(witness.weights.array()))))
    return False


def stability_summary(
    D: PointScheme,
    samples: int = 32,
    seed: int = 0,
    rel_tol: Optional[float] = None,
    n_jobs: Optional[int] = None,
) -> Dict[str, StabilityVerdict]:
    """Both verdicts side by side."""
    return {
        "counting": point_set_stable(D, rel_tol=rel_tol, n_jobs=n_jobs),
        "chow": chow_stability_sampled(D, samples=samples, seed=seed, n_jobs=n_jobs, rel_tol=rel_tol),
    }


def stability_margin(D: PointScheme, rel_tol: Optional[float] = None) -> float:
    """
    Counting-criterion slack per unit mass: positive for stable, zero on the
    boundary, negative for unstable configurations. Comparable across
    configurations of different mass.
    """
    return point_set_stable(D, rel_tol=rel_tol).margin / D.mass
