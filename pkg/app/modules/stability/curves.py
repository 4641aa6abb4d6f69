"""
Numerical Chow weight of a rational curve along a diagonal subgroup.

W(s) = - integral over rho(s) C of h_{diag(lambda)} dV, rho(s) = diag(s^lambda),
is evaluated on a decreasing list of s and extrapolated to s -> 0. The
limit cycle is never built; the estimate comes with convergence
diagnostics and makes no claim when they fail.
"""

import logging
import math
from typing import List, Optional, Sequence

import numpy as np

from app.common.exceptions import ConfigurationError, DegenerateParametrizationError, NumericalFailureError
from app.modules.integration.schemas import CurveScheme, QuadratureGrid
from app.modules.integration.service import curve_contains_point, integrate_samples, sample_curve, sample_curve_points
from app.modules.projective.service import batch_hamiltonian
from app.modules.stability.schemas import CurveWeightEstimate, WeightVector

logger = logging.getLogger(__name__)

# smallest subgroup parameter the quadrature is trusted with
MIN_S = 1e-4
_PANEL_RADIAL_ORDER = 24
_PANEL_ANGULAR_ORDER = 32
_INVARIANCE_TOL = 1e-7
_AREA_TOL = 1e-6
# subgroup element tested for rho(s) C = C
_INVARIANCE_S = 0.5
_INVARIANCE_SAMPLES = 8


def degenerating_curve(C: CurveScheme, weights: WeightVector, s: float) -> CurveScheme:
    """rho(s) C, coefficients rescaled to unit size."""
    moved = np.diag(float(s) ** weights.array()) @ C.components
    moved = moved / np.max(np.abs(moved))
    moved.setflags(write=False)
    return CurveScheme.model_construct(type="curve", degree=C.degree, components=moved)


def curve_is_invariant(C: CurveScheme, weights: WeightVector, seed: int = 0) -> bool:
    """
    True when the subgroup maps C onto itself (the flat limit is C).

    Points of rho(s) C at one s of infinite order are tested for membership
    in C; the stabilizer of C is then an infinite algebraic subgroup of C*,
    hence all of it.
    """
    moved = degenerating_curve(C, weights, _INVARIANCE_S)
    return all(curve_contains_point(C, p) for p in sample_curve_points(moved, _INVARIANCE_SAMPLES, seed=seed))


def graded_grid(weights: WeightVector, s_min: float) -> QuadratureGrid:
    """Composite grid whose innermost panel sits two decades below s_min^(spread of the weights)."""
    spread = float(np.max(weights.array()) - np.min(weights.array()))
    decades = -spread * math.log10(s_min) + 2.0
    return QuadratureGrid(
        radial_order=_PANEL_RADIAL_ORDER,
        angular_order=_PANEL_ANGULAR_ORDER,
        panels=max(1, math.ceil(decades) + 1),
        grading=0.1,
    )


def curve_weight(C: CurveScheme, weights: WeightVector, s: float, grid: QuadratureGrid, n_jobs: Optional[int] = None):
    """(W(s), FS area of rho(s) C)."""
    samples = sample_curve(degenerating_curve(C, weights, s), grid, n_jobs=n_jobs)
    generator = weights.matrix()
    value = -float(integrate_samples(samples, lambda coords: batch_hamiltonian(generator, coords)))
    area = float(sum(np.sum(sample.measure) for sample in samples))
    return value, area


def chow_weight_curve_estimate(
    C: CurveScheme,
    weights: WeightVector,
    s_values: Sequence[float],
    grid: Optional[QuadratureGrid] = None,
    n_jobs: Optional[int] = None,
) -> CurveWeightEstimate:
    """
    Extrapolate W(s) toward s = 0.

    Args:
        C: rational curve
        weights: nontrivial weights of the diagonal subgroup
        s_values: positive, strictly decreasing, smallest >= 1e-4
        grid: quadrature rule (default: graded to the smallest s)
        n_jobs: worker count for the two charts

    Returns:
        CurveWeightEstimate; `invariant` marks rho(s) C = C (decided on the
        curve, not on W), `converged` a contracting difference sequence
    """
    if weights.is_trivial:
        raise ValueError("Chow weights need a nontrivial weight vector")
    if weights.size != C.n + 1:
        raise ValueError(f"Curve lives in P^{C.n}, weights have {weights.size} entries")
    values_s = [float(s) for s in s_values]
    if not values_s or any(s <= 0 for s in values_s) or any(b >= a for a, b in zip(values_s, values_s[1:])):
        raise ConfigurationError("s_values must be positive and strictly decreasing")
    if values_s[-1] < MIN_S:
        raise ConfigurationError(f"s_values below {MIN_S} are not resolved by the quadrature")
    grid = grid or graded_grid(weights, values_s[-1])
    expected_area = 2.0 * np.pi * C.degree

    flags: List[str] = []
    values: List[float] = []
    used: List[float] = []
    for s in values_s:
        try:
            value, area = curve_weight(C, weights, s, grid, n_jobs=n_jobs)
        except (DegenerateParametrizationError, NumericalFailureError) as exc:
            flags.append(f"quadrature breakdown at s={s:g}: {exc.detail}")
            break
        if not np.isfinite(value):
            flags.append(f"quadrature breakdown at s={s:g}: non-finite weight")
            break
        if abs(area - expected_area) > _AREA_TOL * expected_area:
            flags.append(f"area not resolved at s={s:g} ({area:.8f} vs {expected_area:.8f})")
        values.append(value)
        used.append(s)

    if not values:
        return CurveWeightEstimate(estimate=float("nan"), s_values=used, values=values, flags=flags)

    scale = expected_area * float(np.max(np.abs(weights.array())))
    if curve_is_invariant(C, weights):
        if max(abs(v - values[0]) for v in values) > _INVARIANCE_TOL * scale:
            flags.append("invariant curve but W(s) varies; quadrature not resolved")
        return CurveWeightEstimate(
            estimate=values[-1], s_values=used, values=values, converged=not flags, invariant=True, flags=flags
        )
    if len(values) < 3:
        flags.append("fewer than three values; no extrapolation")
        return CurveWeightEstimate(estimate=values[-1], s_values=used, values=values, flags=flags)

    last, previous = values[-1] - values[-2], values[-2] - values[-3]
    if abs(last) <= _INVARIANCE_TOL * scale:
        estimate, ratio, converged = values[-1], None, True
    else:
        ratio = previous / last
        converged = ratio > 1.5
        # geometric tail of the remaining differences
        estimate = values[-1] + last / (ratio - 1.0) if converged else values[-1]
        if not converged:
            flags.append(f"differences do not contract (ratio {ratio:.3f})")
    logger.info(f"Curve Chow weight estimate {estimate:.6f} (ratio {ratio}, converged={converged and not flags})")
    return CurveWeightEstimate(
        estimate=float(estimate),
        s_values=used,
        values=values,
        ratio=ratio,
        converged=converged and not flags,
        flags=flags,
    )
