"""
Quadrature Module

This module provides symmetric quadrature rules on the reference triangle
{(s, t): s, t >= 0, s + t <= 1} given in barycentric coordinates.
"""
import logging
from dataclasses import dataclass
from typing import Dict

import numpy as np

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class QuadratureRule:
    """
    Quadrature rule on the reference triangle.

    Attributes:
        degree (int): Polynomial degree integrated exactly
        points (np.ndarray): Barycentric coordinates, shape (Q, 3)
        weights (np.ndarray): Reference weights summing to 1/2
    """

    degree: int
    points: np.ndarray
    weights: np.ndarray

    @property
    def num_points(self) -> int:
        return self.weights.size

    @property
    def identifier(self) -> str:
        return f"tri-deg{self.degree}-{self.num_points}pt"

    def physical_points(self, corners: np.ndarray) -> np.ndarray:
        """
        Map the quadrature points into every element.

        Args:
            corners (np.ndarray): Element vertex coordinates, shape (M, 3, 2)

        Returns:
            np.ndarray: Physical points, shape (M, Q, 2)
        """
        return np.einsum("qa,mad->mqd", self.points, corners)


def _orbit3(a: float) -> np.ndarray:
    b = 1.0 - 2.0 * a
    return np.array([[b, a, a], [a, b, a], [a, a, b]])


def _build_rules() -> Dict[int, QuadratureRule]:
    centroid = QuadratureRule(
        degree=1,
        points=np.array([[1.0, 1.0, 1.0]]) / 3.0,
        weights=np.array([0.5]),
    )
    edge_free = QuadratureRule(
        degree=2,
        points=_orbit3(1.0 / 6.0),
        weights=np.full(3, 1.0 / 6.0),
    )
    six_point = QuadratureRule(
        degree=4,
        points=np.vstack([_orbit3(0.44594849091596488632), _orbit3(0.09157621350977074346)]),
        weights=np.concatenate([
            np.full(3, 0.22338158967801146570 / 2.0),
            np.full(3, 0.10995174365532186764 / 2.0),
        ]),
    )
    return {1: centroid, 2: edge_free, 4: six_point}


_RULES = _build_rules()


def get_quadrature(degree: int = 4) -> QuadratureRule:
    """
    Get the cheapest rule integrating polynomials of at least `degree` exactly.

    Args:
        degree (int): Required exactness degree (1 to 4)

    Returns:
        QuadratureRule: The rule

    Raises:
        ValueError: If no rule of the requested degree is available
    """
    for available in sorted(_RULES):
        if available >= degree:
            return _RULES[available]
    raise ValueError(f"No quadrature rule of degree {degree}; available degrees: {sorted(_RULES)}")
