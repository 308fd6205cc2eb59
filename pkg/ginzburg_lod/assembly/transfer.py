"""
Transfer Module

This module provides functionality to move fields between the coarse and the
fine level of a mesh hierarchy: nodal prolongation, the coarse-fine mass
matrix and the coarse L2-projection pi_h.
"""
import logging
import weakref
from typing import Callable

import numpy as np
import scipy.sparse as sp

from ..linsolve.solvers import spd_solver
from ..mesh.hierarchy import MeshHierarchy
from .fields import ComplexField, FormOperator, SpaceMap
from .forms import assemble_mass, p1_space_id

logger = logging.getLogger(__name__)

_coarse_mass_solvers = weakref.WeakKeyDictionary()
_coarse_fine_mass = weakref.WeakKeyDictionary()


def prolongation_matrix(mh: MeshHierarchy) -> sp.csr_matrix:
    """Real matrix P (fine vertices x coarse vertices) of nodal interpolation."""
    return mh.prolongation


def assemble_coarse_fine_mass(mh: MeshHierarchy) -> FormOperator:
    """
    Assemble B[z, j] = integral(phi_z^coarse phi_j^fine).

    Coarse hats are fine P1 functions, so B = P^T M_fine holds exactly.

    Args:
        mh (MeshHierarchy): The hierarchy

    Returns:
        FormOperator: Rectangular operator of kind "coarse_fine_mass" acting on fine fields
    """
    if mh not in _coarse_fine_mass:
        fine_mass = assemble_mass(mh.fine).S
        coupling = (prolongation_matrix(mh).T @ fine_mass).tocsr()
        _coarse_fine_mass[mh] = FormOperator.from_blocks(
            "coarse_fine_mass", coupling, space_id=p1_space_id(mh.fine_level)
        )
    return _coarse_fine_mass[mh]


def _coarse_mass_solver(mh: MeshHierarchy) -> Callable[[np.ndarray], np.ndarray]:
    if mh not in _coarse_mass_solvers:
        _coarse_mass_solvers[mh] = spd_solver(assemble_mass(mh.coarse), method="direct", tol=1e-12, label="coarse mass")
    return _coarse_mass_solvers[mh]


def prolongate(mh: MeshHierarchy, v: ComplexField) -> ComplexField:
    """
    Interpolate a coarse P1 field onto the fine vertices.

    Args:
        mh (MeshHierarchy): The hierarchy
        v (ComplexField): Coarse field

    Returns:
        ComplexField: Fine field representing the same function

    Raises:
        SpaceMismatchError: If v is not a coarse P1 field
    """
    v.check_space(p1_space_id(mh.coarse_level))
    P = prolongation_matrix(mh)
    return ComplexField(p1_space_id(mh.fine_level), P @ v.re, P @ v.im)


def l2_project_coarse(mh: MeshHierarchy, v: ComplexField) -> ComplexField:
    """
    Project a fine field onto the coarse P1 space in L2.

    Solves M_coarse x = B v for the real and the imaginary block.

    Args:
        mh (MeshHierarchy): The hierarchy
        v (ComplexField): Fine field

    Returns:
        ComplexField: Coarse field pi_h v
    """
    v.check_space(p1_space_id(mh.fine_level))
    load = assemble_coarse_fine_mass(mh).apply(v)
    return ComplexField.from_stacked(p1_space_id(mh.coarse_level), _coarse_mass_solver(mh)(load))


def fine_space_map(mh: MeshHierarchy) -> SpaceMap:
    """Identity map of the fine P1 space."""
    return SpaceMap.identity(p1_space_id(mh.fine_level), mh.fine.num_vertices)


def coarse_space_map(mh: MeshHierarchy) -> SpaceMap:
    """Prolongation of the coarse P1 space into the fine space."""
    return SpaceMap(p1_space_id(mh.coarse_level), p1_space_id(mh.fine_level), prolongation_matrix(mh))
