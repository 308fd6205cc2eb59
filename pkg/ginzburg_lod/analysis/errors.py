"""
Error Analysis Module

This module provides functionality to measure errors of discrete minimizers
against a fine reference state, best-approximation errors of discrete spaces,
and least-squares fits of convergence and decay rates.
"""
import logging
from dataclasses import asdict, dataclass
from typing import Any, Dict, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.ndimage

from ..assembly.fields import ComplexField, FormOperator, SpaceMap
from ..linsolve.solvers import spd_solver
from ..lodspace.space import LodSpace

logger = logging.getLogger(__name__)

ALIGNMENT_TOL = 1e-8


@dataclass
class ErrorRecord:
    """
    One row of a convergence study.

    Attributes:
        space (str): Space tag (coarse_fem, lod, fine_fem)
        kappa (float): Ginzburg-Landau parameter
        beta (float): Corrector stabilization
        ell (int): Patch layers (0 for FEM spaces)
        coarse_h (float): Coarse mesh size
        fine_h (float): Fine mesh size
        seed (int): Seed of the initial guess
        err_h1k (float): H^1_kappa error against the reference
        err_l2 (float): L2 error against the reference
        err_best (float): H^1_kappa best-approximation error of the space
        energy (float): Energy of the discrete minimizer
        energy_ref (float): Energy of the reference
        iters (int): Descent iterations
        status (str): "ok" or the failure message
    """

    space: str
    kappa: float
    beta: float
    ell: int
    coarse_h: float
    fine_h: float
    seed: int
    err_h1k: float = float("nan")
    err_l2: float = float("nan")
    err_best: float = float("nan")
    energy: float = float("nan")
    energy_ref: float = float("nan")
    iters: int = 0
    status: str = "ok"

    def __post_init__(self):
        for name in ("err_h1k", "err_l2", "err_best"):
            value = getattr(self, name)
            if not np.isnan(value) and value < 0:
                raise ValueError(f"{name} must be non-negative, got {value}")

    def as_row(self) -> Dict[str, Any]:
        return asdict(self)


def _check_pair(u: ComplexField, ref: ComplexField):
    ref.check_space(u.space_id)


def phase_mismatch(u: ComplexField, ref: ComplexField, mass: FormOperator) -> float:
    """|Im alpha| / |alpha| for alpha = integral(ref conj(u)); zero for aligned fields."""
    _check_pair(u, ref)
    alpha = np.vdot(u.values, mass.S @ ref.values)
    if alpha == 0:
        return float("inf")
    return float(abs(alpha.imag) / abs(alpha))


def error_h1k(
    u: ComplexField, ref: ComplexField, gram: FormOperator, mass: Optional[FormOperator] = None
) -> float:
    """
    H^1_kappa norm of u - ref.

    Args:
        u (ComplexField): Phase-aligned approximation
        ref (ComplexField): Reference state in the same space
        gram (FormOperator): H^1_kappa Gram operator of that space
        mass (FormOperator, optional): Mass operator used to flag misaligned inputs

    Returns:
        float: The error

    Raises:
        SpaceMismatchError: If the fields live in different spaces
    """
    _check_pair(u, ref)
    if mass is not None:
        mismatch = phase_mismatch(u, ref, mass)
        if mismatch > ALIGNMENT_TOL:
            logger.warning(f"Error measured between fields that are not phase aligned (|Im a|/|a| = {mismatch:.3e})")
    return float(np.sqrt(max(gram.quadratic(u - ref), 0.0)))


def error_l2(u: ComplexField, ref: ComplexField, mass: FormOperator) -> float:
    _check_pair(u, ref)
    return float(np.sqrt(max(mass.quadratic(u - ref), 0.0)))


def best_approximation_error(space: Union[LodSpace, SpaceMap], ref: ComplexField, gram: FormOperator) -> float:
    """
    Distance of the reference to a discrete space in the H^1_kappa norm.

    Solves the normal equations of the H^1_kappa-orthogonal projection onto
    span{psi_z, i psi_z} and returns the norm of the remainder.

    Args:
        space (Union[LodSpace, SpaceMap]): LOD space or any fine-represented space
        ref (ComplexField): Fine reference state
        gram (FormOperator): Fine H^1_kappa Gram operator

    Returns:
        float: inf over v in the space of ||ref - v||_{H^1_kappa}
    """
    space_map = space.space_map if isinstance(space, LodSpace) else space
    ref.check_space(space_map.fine_space_id)

    restricted = space_map.restrict_operator(gram)
    load = space_map.restrict(gram.apply(ref))
    try:
        coefficients = spd_solver(restricted, method="direct", label=f"Gram of {space_map.space_id}")(load)
    except Exception as e:
        logger.error(f"Best approximation in {space_map.space_id} failed: {str(e)}")
        raise
    projection = space_map.expand(ComplexField.from_stacked(space_map.space_id, coefficients))
    return float(np.sqrt(max(gram.quadratic(ref - projection), 0.0)))


def least_squares_slope(x: np.ndarray, y: np.ndarray) -> float:
    slope, _ = np.polyfit(x, y, 1)
    return float(slope)


def _validate_pairs(pairs: Sequence[Tuple[float, float]], what: str) -> np.ndarray:
    data = np.asarray(pairs, dtype=float)
    if data.ndim != 2 or data.shape[0] < 2 or data.shape[1] != 2:
        raise ValueError(f"{what} needs at least 2 (x, error) pairs, got {len(pairs)}")
    if np.any(data[:, 1] <= 0) or not np.all(np.isfinite(data)):
        raise ValueError(f"{what} needs positive finite errors")
    if np.unique(data[:, 0]).size < 2:
        raise ValueError(f"{what} needs at least 2 distinct abscissae")
    return data


def fit_rate(pairs: Sequence[Tuple[float, float]], drop_coarsest: bool = False) -> float:
    """
    Fit err ~ C h^s by least squares in log-log scale.

    Args:
        pairs (Sequence[Tuple[float, float]]): (h, err) pairs
        drop_coarsest (bool): Ignore the pair with the largest h

    Returns:
        float: The slope s

    Raises:
        ValueError: For fewer than 2 usable pairs or non-positive entries
    """
    data = _validate_pairs(pairs, "Rate fit")
    if np.any(data[:, 0] <= 0):
        raise ValueError("Rate fit needs positive mesh sizes")
    if drop_coarsest:
        data = np.delete(data, np.argmax(data[:, 0]), axis=0)
        data = _validate_pairs(data, "Rate fit")
    return least_squares_slope(np.log(data[:, 0]), np.log(data[:, 1]))


def fit_decay(pairs: Sequence[Tuple[float, float]]) -> float:
    """
    Fit err ~ C exp(-r l) by least squares.

    Args:
        pairs (Sequence[Tuple[float, float]]): (l, err) pairs

    Returns:
        float: The rate r
    """
    data = _validate_pairs(pairs, "Decay fit")
    return -least_squares_slope(data[:, 0], np.log(data[:, 1]))


def decay_factor(rate: float) -> float:
    """Per-layer factor theta = exp(-r)."""
    return float(np.exp(-rate))


def count_local_minima(grid: np.ndarray, threshold: float) -> int:
    """
    Count vortex cores on a sampled modulus grid.

    A core is a connected group of grid points below `threshold` that are
    minimal within their 3x3 neighborhood.

    Args:
        grid (np.ndarray): 2-D array of |u| samples
        threshold (float): Upper bound on the modulus of a core

    Returns:
        int: Number of cores
    """
    grid = np.asarray(grid, dtype=float)
    minimal = grid == scipy.ndimage.minimum_filter(grid, size=3, mode="nearest")
    candidates = minimal & (grid < threshold)
    _, count = scipy.ndimage.label(candidates, structure=np.ones((3, 3)))
    return int(count)
