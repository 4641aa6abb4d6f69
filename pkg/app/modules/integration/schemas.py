"""
Schemes (point sets and rational curves) and the quadrature grid.
"""

from functools import lru_cache
from typing import Annotated, List, Literal, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.common.exceptions import ConfigurationError, DegenerateParametrizationError
from app.common.validators import numerical_rank, validate_finite
from app.modules.projective.schemas import ProjPoint

# Fixed seed for the random dehomogenizations used in base-point checks
_BASE_POINT_SEED = 20240613
_BASE_POINT_TOL = 1e-8


class PointScheme(BaseModel):
    """Finite point set with positive integer multiplicities (counting measure)."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    type: Literal["points"] = "points"
    points: List[ProjPoint]
    multiplicities: List[int]

    @model_validator(mode="before")
    @classmethod
    def default_multiplicities(cls, data):
        if isinstance(data, dict) and data.get("multiplicities") is None and "points" in data:
            data = {**data, "multiplicities": [1] * len(data["points"])}
        return data

    @field_validator("points", mode="before")
    @classmethod
    def parse_points(cls, v):
        # raw coordinate lists are accepted as points
        return [p if isinstance(p, (ProjPoint, dict)) else ProjPoint(coords=p) for p in v]

    @model_validator(mode="after")
    def validate_points(self):
        if not self.points:
            raise ValueError("A point scheme needs at least one point")
        if len(self.points) != len(self.multiplicities):
            raise ValueError("points and multiplicities must have the same length")
        if any(m < 1 for m in self.multiplicities):
            raise ValueError("multiplicities must be positive integers")
        if len({p.coords.size for p in self.points}) != 1:
            raise ValueError("all points must live in the same projective space")
        return self

    @property
    def n(self) -> int:
        return self.points[0].n

    @property
    def mass(self) -> int:
        return int(sum(self.multiplicities))

    def coordinate_matrix(self) -> np.ndarray:
        """(N, n+1) stacked homogeneous coordinates."""
        return np.stack([p.coords for p in self.points])

    def weight_vector(self) -> np.ndarray:
        return np.asarray(self.multiplicities, dtype=float)

    def transformed(self, matrix: np.ndarray) -> "PointScheme":
        """The scheme g.D for an invertible matrix g."""
        moved = self.coordinate_matrix() @ np.asarray(matrix).T
        return PointScheme(points=[ProjPoint(coords=row) for row in moved], multiplicities=list(self.multiplicities))


def _complex_coefficients(v) -> np.ndarray:
    array = np.asarray(v)
    if array.ndim == 3 and array.shape[-1] == 2 and not np.iscomplexobj(array):
        array = array[..., 0] + 1j * array[..., 1]
    array = np.array(array, dtype=np.complex128)
    if array.ndim != 2:
        raise ValueError(f"components must be an (n+1) x (d+1) array, got shape {array.shape}")
    return array


def find_base_points(coefficients: np.ndarray, tol: float = _BASE_POINT_TOL) -> List[complex]:
    """
    Common zeros of the components on the parameter line.

    A random combination of the components is factored in the chart s = 1;
    every root at which all components vanish (relative to the size of
    their terms) is a base point. The point s = 0 is reported as inf.
    """
    degree = coefficients.shape[1] - 1
    scale = np.max(np.abs(coefficients))
    base_points: List[complex] = []
    if np.max(np.abs(coefficients[:, degree])) <= tol * scale:
        base_points.append(complex(np.inf))
    rng = np.random.default_rng(_BASE_POINT_SEED)
    combination = rng.normal(size=coefficients.shape[0]) + 1j * rng.normal(size=coefficients.shape[0])
    polynomial = combination @ coefficients
    polynomial = np.where(np.abs(polynomial) <= 1e-14 * np.max(np.abs(polynomial)), 0, polynomial)
    polynomial = np.trim_zeros(polynomial, "b")
    if polynomial.size <= 1:
        return base_points
    powers = np.arange(degree + 1)
    for root in np.polynomial.polynomial.polyroots(polynomial):
        values = coefficients @ (root ** powers)
        magnitude = np.abs(coefficients) @ (np.abs(root) ** powers)
        if np.max(np.abs(values)) <= tol * np.max(magnitude):
            base_points.append(complex(root))
    return base_points


class CurveScheme(BaseModel):
    """
    Rational curve given by n+1 binary forms of degree d.

    components[i, k] is the coefficient of s^(d-k) t^k in the i-th form, so
    chart 0 (s = 1, t = u) reads Z_i(u) = sum_k components[i, k] u^k and
    chart 1 (t = 1, s = u) uses the reversed coefficients.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    type: Literal["curve"] = "curve"
    degree: int = Field(..., ge=1)
    components: np.ndarray

    @field_validator("components", mode="before")
    @classmethod
    def parse_components(cls, v):
        array = _complex_coefficients(v)
        if not validate_finite(array):
            raise ValueError("curve coefficients must be finite")
        array.setflags(write=False)
        return array

    @model_validator(mode="after")
    def validate_parametrization(self):
        if self.components.shape[1] != self.degree + 1:
            raise ValueError(
                f"each component needs degree + 1 = {self.degree + 1} coefficients, "
                f"got {self.components.shape[1]}"
            )
        if self.components.shape[0] < 2:
            raise ValueError("a curve needs at least two components")
        nonzero_rows = [row for row in self.components if np.any(row != 0)]
        if numerical_rank(nonzero_rows) < 2:
            raise DegenerateParametrizationError("The parametrization collapses to a single point")
        base_points = find_base_points(self.components)
        if base_points:
            raise DegenerateParametrizationError(
                f"The components share a common factor (base points at {base_points})"
            )
        return self

    @property
    def n(self) -> int:
        return self.components.shape[0] - 1

    def chart_coefficients(self, chart: int) -> np.ndarray:
        if chart not in (0, 1):
            raise ValueError("chart must be 0 or 1")
        return self.components if chart == 0 else self.components[:, ::-1]

    def transformed(self, matrix: np.ndarray) -> "CurveScheme":
        """The curve g.C; invertible g preserves base-point freeness, so no re-validation."""
        moved = np.asarray(matrix, dtype=np.complex128) @ self.components
        moved.setflags(write=False)
        return CurveScheme.model_construct(type="curve", degree=self.degree, components=moved)


@lru_cache(maxsize=32)
def _disk_rule(radial_order: int, angular_order: int, panels: int = 1, grading: float = 0.1) -> Tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(radial_order)
    # panel edges 0 < grading^(panels-1) < ... < grading < 1
    edges = np.concatenate([[0.0], grading ** np.arange(panels - 1, -1, -1, dtype=float)])
    lows, highs = edges[:-1], edges[1:]
    radius = np.concatenate([lo + 0.5 * (hi - lo) * (x + 1.0) for lo, hi in zip(lows, highs)])
    # Jacobian r dr
    radial_weights = np.concatenate([0.5 * (hi - lo) * w for lo, hi in zip(lows, highs)]) * radius
    angles = 2.0 * np.pi * np.arange(angular_order) / angular_order
    nodes = (radius[:, None] * np.exp(1j * angles)[None, :]).reshape(-1)
    weights = np.repeat(radial_weights * (2.0 * np.pi / angular_order), angular_order)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


Scheme = Annotated[Union[PointScheme, CurveScheme], Field(discriminator="type")]


class QuadratureGrid(BaseModel):
    """
    Two-chart rule on the parameter line: each chart is the unit disk with a
    Gauss-Legendre radial rule times an equispaced angular rule.

    With panels > 1 the radial rule is composite on geometrically graded
    annuli, which resolves curves concentrating near u = 0 at small scales.
    """
    model_config = ConfigDict(frozen=True)

    radial_order: int = 32
    angular_order: int = 64
    panels: int = 1
    grading: float = 0.1

    @model_validator(mode="after")
    def validate_orders(self):
        if self.radial_order < 1 or self.angular_order < 1 or self.panels < 1:
            raise ConfigurationError(
                f"Quadrature grid is empty (radial_order={self.radial_order}, "
                f"angular_order={self.angular_order}, panels={self.panels})"
            )
        if not 0 < self.grading < 1:
            raise ConfigurationError(f"Panel grading must lie in (0, 1), got {self.grading}")
        return self

    def _rule(self) -> Tuple[np.ndarray, np.ndarray]:
        return _disk_rule(self.radial_order, self.angular_order, self.panels, self.grading)

    @property
    def nodes(self) -> np.ndarray:
        return self._rule()[0]

    @property
    def weights(self) -> np.ndarray:
        return self._rule()[1]

    @property
    def nodes_per_chart(self) -> int:
        return self.radial_order * self.panels * self.angular_order
