"""
Integrals over schemes: counting measure on point schemes and FS-area
quadrature on rational curves.

Integrands are evaluated in batches: a callable receives an (N, n+1) array
of homogeneous coordinates and returns an (N,) or (N, ...) array. Use
`pointwise` to lift a function of a single ProjPoint.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Optional, Tuple, Union

import numpy as np
from scipy.special import comb

from app.common.exceptions import DegenerateParametrizationError
from app.common.parallel import ordered_map
from app.core.config import settings
from app.modules.integration.schemas import CurveScheme, PointScheme, QuadratureGrid, find_base_points
from app.modules.projective.schemas import GroupElement, ProjPoint
from app.modules.projective.service import batch_norm_sq

logger = logging.getLogger(__name__)

BatchIntegrand = Callable[[np.ndarray], np.ndarray]
AnyScheme = Union[PointScheme, CurveScheme]


@dataclass(frozen=True)
class CurveSample:
    """Quadrature nodes of one chart pushed through the parametrization."""
    chart: int
    coords: np.ndarray      # Z(u), (N, n+1)
    tangents: np.ndarray    # Z'(u) projected orthogonally to Z(u)
    density: np.ndarray     # FS area density rho(u)
    weights: np.ndarray     # quadrature weights of the disk rule

    @property
    def measure(self) -> np.ndarray:
        """Node weights of the FS area measure (w * rho)."""
        return self.weights * self.density


def _evaluate_chart(C: CurveScheme, chart: int, u: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    coefficients = C.chart_coefficients(chart)
    degree = C.degree
    values = np.vander(u, degree + 1, increasing=True) @ coefficients.T
    derivative_coefficients = coefficients[:, 1:] * np.arange(1, degree + 1)[None, :]
    derivatives = np.vander(u, degree, increasing=True) @ derivative_coefficients.T
    return values, derivatives


def _tangents_and_density(values: np.ndarray, derivatives: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    norm_sq = batch_norm_sq(values)
    overlap = np.einsum("ni,ni->n", values.conj(), derivatives)
    tangents = derivatives - (overlap / norm_sq)[:, None] * values
    # rho = 2 (|Z|^2 |Z'|^2 - |<Z, Z'>|^2) / |Z|^4 = 2 |Z'_perp|^2 / |Z|^2
    density = 2.0 * batch_norm_sq(tangents) / norm_sq
    return tangents, density


def fs_density(C: CurveScheme, chart: int, u: complex) -> float:
    """
    FS area density of the pulled-back form at parameter u of a chart.

    Args:
        C: curve
        chart: 0 (s = 1) or 1 (t = 1)
        u: parameter value

    Returns:
        rho(u) >= 0 with C^* omega_FS = rho dx ^ dy
    """
    values, derivatives = _evaluate_chart(C, chart, np.array([u], dtype=np.complex128))
    if batch_norm_sq(values)[0] == 0:
        raise DegenerateParametrizationError(f"The parametrization vanishes at u = {u} (chart {chart})")
    _, density = _tangents_and_density(values, derivatives)
    return float(density[0])


def sample_chart(C: CurveScheme, grid: QuadratureGrid, chart: int) -> CurveSample:
    values, derivatives = _evaluate_chart(C, chart, grid.nodes)
    if np.any(batch_norm_sq(values) == 0):
        raise DegenerateParametrizationError(f"The parametrization vanishes at a quadrature node (chart {chart})")
    tangents, density = _tangents_and_density(values, derivatives)
    return CurveSample(chart=chart, coords=values, tangents=tangents, density=density, weights=grid.weights)


def _unwrap(value) -> np.ndarray:
    return np.asarray(getattr(value, "entries", value))


def pointwise(f: Callable[[ProjPoint], object]) -> BatchIntegrand:
    """Lift a function of one ProjPoint to a batch integrand."""
    def batched(coords: np.ndarray) -> np.ndarray:
        return np.asarray([_unwrap(f(ProjPoint(coords=row))) for row in coords])
    return batched


def integrate_samples(samples, f: BatchIntegrand):
    """Sum w * rho * f over already evaluated charts, chart 0 first."""
    partials = [np.tensordot(sample.measure, np.asarray(f(sample.coords)), axes=1) for sample in samples]
    total = partials[0]
    for partial in partials[1:]:
        total = total + partial
    return total


def sample_curve(C: CurveScheme, grid: QuadratureGrid, n_jobs: Optional[int] = None):
    """Both chart samples, in chart order."""
    logger.debug(f"Sampling a degree {C.degree} curve on {grid.nodes_per_chart} nodes per chart")
    return ordered_map(lambda chart: sample_chart(C, grid, chart), (0, 1), n_jobs=n_jobs)


def integrate_curve(C: CurveScheme, grid: QuadratureGrid, f: BatchIntegrand, n_jobs: Optional[int] = None):
    """
    Integral of f against the FS area of C.

    Args:
        C: curve
        grid: two-chart quadrature rule
        f: batch integrand (real or matrix valued)
        n_jobs: worker count for the chart evaluations

    Returns:
        Sum over charts and nodes of w * f([Z(u)]) * rho(u), in fixed order
    """
    return integrate_samples(sample_curve(C, grid, n_jobs=n_jobs), f)


def integrate_points(D: PointScheme, f: Callable[[ProjPoint], object]):
    """Sum of multiplicity(p) * f(p) in the order of D.points."""
    total = None
    for point, multiplicity in zip(D.points, D.multiplicities):
        term = multiplicity * _unwrap(f(point))
        total = term if total is None else total + term
    return total


def integrate_points_batch(D: PointScheme, f: BatchIntegrand):
    return np.tensordot(D.weight_vector(), np.asarray(f(D.coordinate_matrix())), axes=1)


def integrate(S: AnyScheme, grid: QuadratureGrid, f: BatchIntegrand, n_jobs: Optional[int] = None):
    """Dispatch on the scheme type."""
    if isinstance(S, PointScheme):
        return integrate_points_batch(S, f)
    return integrate_curve(S, grid, f, n_jobs=n_jobs)


def _ones(coords: np.ndarray) -> np.ndarray:
    return np.ones(coords.shape[0])


def volume(S: AnyScheme, grid: QuadratureGrid) -> float:
    """Total mass of a point scheme, FS area of a curve (2 pi * degree)."""
    return float(integrate(S, grid, _ones))


def sample_curve_points(C: CurveScheme, count: int, seed: int) -> list:
    """
    Points on the image of C at pseudo-random parameters.

    Each draw picks a chart and a parameter uniformly in the unit disk, so
    the points are (1, u)-type or (u', 1)-type images. Deterministic per seed.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(seed)
    charts = rng.integers(0, 2, size=count)
    radii = np.sqrt(rng.uniform(size=count))
    angles = rng.uniform(0.0, 2.0 * np.pi, size=count)
    parameters = radii * np.exp(1j * angles)
    points = []
    for chart, u in zip(charts, parameters):
        values, _ = _evaluate_chart(C, int(chart), np.array([u]))
        points.append(ProjPoint(coords=values[0]))
    return points


def transform_scheme(g: Union[GroupElement, np.ndarray], S: AnyScheme) -> AnyScheme:
    """The scheme gS."""
    matrix = g.matrix if isinstance(g, GroupElement) else np.asarray(g, dtype=np.complex128)
    return S.transformed(matrix)


def curve_contains_point(C: CurveScheme, p: ProjPoint, tol: float = 1e-8) -> bool:
    """
    True when [p] lies on the image of C.

    C passes through p exactly where the component of Z(u) orthogonal to p
    vanishes, i.e. at the base points of the projected parametrization.
    """
    if p.coords.size != C.n + 1:
        return False
    unit = p.unit()
    projector = np.eye(C.n + 1) - np.outer(unit, unit.conj())
    return len(find_base_points(projector @ C.components, tol=tol)) > 0


def default_grid() -> QuadratureGrid:
    """Quadrature orders from settings."""
    return QuadratureGrid(radial_order=settings.RADIAL_ORDER, angular_order=settings.ANGULAR_ORDER)


def rational_normal_curve(degree: int) -> CurveScheme:
    """Components sqrt(C(d, i)) s^(d-i) t^i in P^d (the balanced standard form)."""
    coefficients = np.diag(np.sqrt(comb(degree, np.arange(degree + 1))))
    return CurveScheme(degree=degree, components=coefficients)


def projective_line(n: int = 1) -> CurveScheme:
    """The line [s : t : 0 : ... : 0] in P^n."""
    coefficients = np.zeros((n + 1, 2), dtype=np.complex128)
    coefficients[0, 0] = coefficients[1, 1] = 1.0
    return CurveScheme(degree=1, components=coefficients)
