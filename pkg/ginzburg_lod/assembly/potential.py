"""
Magnetic Potential Module

This module provides the given magnetic vector potentials A entering the
kinetic term (i/kappa grad + A).
"""
import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np

logger = logging.getLogger(__name__)

PotentialFunc = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class MagneticPotential:
    """
    Real vector potential A: [0, 1]^2 -> R^2.

    Attributes:
        name (str): Identifier used in cache keys and metadata
        evaluator (PotentialFunc): Maps points (..., 2) to values (..., 2)
        sup_norm (float): ||A||_{L^inf}
    """

    name: str
    evaluator: PotentialFunc
    sup_norm: float

    def __call__(self, points: np.ndarray) -> np.ndarray:
        return self.evaluator(np.asarray(points, dtype=float))

    def coercivity_shift(self) -> float:
        """Smallest beta for which a_beta(v, v) >= 1/2 ||v||^2_{H^1_kappa} holds."""
        return 0.5 + self.sup_norm ** 2


def _trigonometric(points: np.ndarray) -> np.ndarray:
    x = np.pi * points[..., 0]
    y = np.pi * points[..., 1]
    values = np.empty(points.shape)
    values[..., 0] = np.sqrt(2.0) * np.sin(x) * np.cos(y)
    values[..., 1] = -np.sqrt(2.0) * np.cos(x) * np.sin(y)
    return values


def _zero(points: np.ndarray) -> np.ndarray:
    return np.zeros(points.shape)


def default_potential() -> MagneticPotential:
    """A(x, y) = sqrt(2) (sin(pi x) cos(pi y), -cos(pi x) sin(pi y)); divergence free, tangential on the boundary."""
    return MagneticPotential(name="trig", evaluator=_trigonometric, sup_norm=np.sqrt(2.0))


def zero_potential() -> MagneticPotential:
    return MagneticPotential(name="zero", evaluator=_zero, sup_norm=0.0)


def get_potential(name: str) -> MagneticPotential:
    """
    Look up a built-in potential by name.

    Args:
        name (str): "trig" (alias "default") or "zero"

    Returns:
        MagneticPotential: The potential

    Raises:
        ValueError: For unknown names
    """
    if name in ("trig", "default"):
        return default_potential()
    if name == "zero":
        return zero_potential()
    raise ValueError(f"Unknown magnetic potential '{name}'")
