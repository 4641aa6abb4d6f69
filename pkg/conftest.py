"""
Fixtures compartidos por los tests de todos los módulos
"""

import numpy as np
import pytest

from app.modules.integration.schemas import CurveScheme, PointScheme, QuadratureGrid


def make_roots_of_unity(n: int) -> PointScheme:
    zeta = np.exp(2j * np.pi / (n + 2))
    return PointScheme(points=[zeta ** (b * np.arange(n + 1)) for b in range(n + 2)])


@pytest.fixture
def grid():
    return QuadratureGrid(radial_order=32, angular_order=64)


@pytest.fixture
def fine_grid():
    return QuadratureGrid(radial_order=48, angular_order=96)


@pytest.fixture
def conic():
    """Z(u) = (1, sqrt(2) u, u^2), balanced at the identity."""
    return CurveScheme(degree=2, components=[[1, 0, 0], [0, np.sqrt(2), 0], [0, 0, 1]])


@pytest.fixture
def roots_of_unity():
    return make_roots_of_unity
