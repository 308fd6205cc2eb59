"""
Correctors Module

This module provides functionality to solve the element corrector problems
of the localized orthogonal decomposition: for a coarse element T and a
coarse hat phi_z of T, find C_{T,l} phi_z in W(N^l(T)) with

    a_beta(C_{T,l} phi_z, w) = a_{beta,T}(phi_z, w)   for all w in W(N^l(T)),

where W(G) holds the fine functions that vanish outside G and whose coarse
L2-projection is zero. The constraint pi_h w = 0 is imposed by Lagrange
multipliers against every coarse hat touching the patch, separately for the
real and imaginary parts.
"""
import logging
from dataclasses import dataclass
from functools import cached_property
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from ..assembly.fields import ComplexField
from ..assembly.forms import assemble_local, local_abeta, p1_space_id
from ..assembly.potential import MagneticPotential
from ..assembly.quadrature import QuadratureRule, get_quadrature
from ..assembly.transfer import assemble_coarse_fine_mass, prolongation_matrix
from ..linsolve.solvers import SaddleSystem, drop_redundant_constraints, solve_saddle
from ..mesh.hierarchy import MeshHierarchy, Patch, layer_distances, patch

logger = logging.getLogger(__name__)


@dataclass
class PatchCorrectors:
    """
    Correctors of the three coarse hats of one element.

    Attributes:
        patch (Patch): The patch the correctors live on
        vertices (np.ndarray): Coarse vertices of the element, in local order
        values (np.ndarray): Complex corrector values on patch.fine_interior_vertices, shape (F, 3)
        energy (float): sqrt of the summed patch energies a_beta(C phi_z, C phi_z)
    """

    patch: Patch
    vertices: np.ndarray
    values: np.ndarray
    energy: float


def _real_block(H: sp.spmatrix) -> sp.csr_matrix:
    H = sp.csr_matrix(H)
    return sp.bmat([[H.real, -H.imag], [H.imag, H.real]], format="csr")


class CorrectorAssembler:
    """
    Shared fine-scale data of all corrector problems of one (kappa, beta) pair.

    Attributes:
        mh (MeshHierarchy): The hierarchy
        potential (MagneticPotential): Magnetic potential A
        kappa (float): Ginzburg-Landau parameter
        beta (float): Stabilization shift of a_beta
        quad (QuadratureRule): Quadrature used for A-dependent terms
    """

    def __init__(
        self,
        mh: MeshHierarchy,
        potential: MagneticPotential,
        kappa: float,
        beta: float,
        quad: Optional[QuadratureRule] = None,
    ):
        if kappa <= 0:
            raise ValueError(f"kappa must be positive, got {kappa}")
        if beta < 0:
            raise ValueError(f"beta must be non-negative, got {beta}")
        self.mh = mh
        self.potential = potential
        self.kappa = kappa
        self.beta = beta
        self.quad = quad or get_quadrature(4)

    @cached_property
    def fine_local(self) -> np.ndarray:
        """Fine element Hermitian matrices of a_beta, shape (M_fine, 3, 3)."""
        return local_abeta(self.mh.fine, self.potential, self.kappa, self.beta, self.quad)

    @cached_property
    def fine_form(self) -> sp.csr_matrix:
        return assemble_local(self.mh.fine, self.fine_local)

    @cached_property
    def prolongation(self) -> sp.csr_matrix:
        return prolongation_matrix(self.mh)

    @cached_property
    def coupling(self) -> sp.csr_matrix:
        return assemble_coarse_fine_mass(self.mh).S

    def element_form(self, element: int) -> sp.csr_matrix:
        """a_{beta,T} on the fine children of a coarse element, as a fine Hermitian matrix."""
        children = self.mh.fine_children[element]
        return assemble_local(self.mh.fine, self.fine_local[children], children)

    def local_correctors(
        self,
        element: int,
        ell: int,
        phases: Sequence[complex] = (1.0,),
        area: Optional[Patch] = None,
    ) -> PatchCorrectors:
        """
        Solve the corrector problems of the three hats of an element on its l-layer patch.

        One factorization of the patch saddle system serves every load.

        Args:
            element (int): Coarse element T
            ell (int): Patch layers
            phases (Sequence[complex]): Complex factors c; loads are a_{beta,T}(c phi_z, .)
            area (Patch, optional): Precomputed patch

        Returns:
            PatchCorrectors: Correctors with columns ordered (phase, local vertex)
        """
        area = area or patch(self.mh, element, ell)
        free = area.fine_interior_vertices
        vertices = self.mh.coarse.triangles[element]

        constraints = self.coupling[area.coarse_vertices_active][:, free]
        constraints, _ = drop_redundant_constraints(constraints)
        block_constraints = sp.block_diag([constraints, constraints], format="csr")

        patch_form = self.fine_form[free][:, free]
        hats = self.prolongation[:, vertices].toarray()
        loads = self.element_form(element) @ np.hstack([phase * hats for phase in phases])
        loads = loads[free]
        rhs = np.vstack([loads.real, loads.imag])

        label = f"patch(T={element}, ell={ell})"
        try:
            solution = solve_saddle(SaddleSystem(_real_block(patch_form), block_constraints, rhs, label=label))
        except Exception as e:
            logger.error(f"Corrector problem on {label} failed: {str(e)}")
            raise

        n_free = free.size
        values = solution[:n_free] + 1j * solution[n_free:]
        energies = np.real(np.einsum("fk,fk->k", values.conj(), patch_form @ values))
        energy = float(np.sqrt(max(np.sum(energies), 0.0)))
        logger.debug(f"Solved {label}: {n_free} free fine vertices, {constraints.shape[0]} constraints")
        return PatchCorrectors(patch=area, vertices=vertices, values=values, energy=energy)


def element_corrector(
    mh: MeshHierarchy,
    potential: MagneticPotential,
    kappa: float,
    beta: float,
    element: int,
    ell: int,
    phase: complex = 1.0,
    quad: Optional[QuadratureRule] = None,
) -> List[ComplexField]:
    """
    Compute the truncated correctors C_{T,l}(c phi_z) for the three vertices z of T.

    Args:
        mh (MeshHierarchy): The hierarchy
        potential (MagneticPotential): Magnetic potential A
        kappa (float): Ginzburg-Landau parameter
        beta (float): Stabilization shift
        element (int): Coarse element T
        ell (int): Patch layers, at least 1
        phase (complex): Complex factor c of the hats (1 or i in practice)
        quad (QuadratureRule, optional): Quadrature rule

    Returns:
        List[ComplexField]: Fine correctors in the local vertex order of T
    """
    assembler = CorrectorAssembler(mh, potential, kappa, beta, quad)
    result = assembler.local_correctors(element, ell, phases=(phase,))
    fine_id = p1_space_id(mh.fine_level)
    fields = []
    for column in range(3):
        values = np.zeros(mh.fine.num_vertices, dtype=complex)
        values[result.patch.fine_interior_vertices] = result.values[:, column]
        fields.append(ComplexField.from_complex(fine_id, values))
    return fields


def ideal_correctors(
    mh: MeshHierarchy,
    potential: MagneticPotential,
    kappa: float,
    beta: float,
    quad: Optional[QuadratureRule] = None,
) -> sp.csr_matrix:
    """
    Solve the global corrector problem a_beta(C phi_z, w) = a_beta(phi_z, w) for all w in W.

    Args:
        mh (MeshHierarchy): The hierarchy
        potential (MagneticPotential): Magnetic potential A
        kappa (float): Ginzburg-Landau parameter
        beta (float): Stabilization shift
        quad (QuadratureRule, optional): Quadrature rule

    Returns:
        sp.csr_matrix: Complex matrix (fine vertices x coarse vertices) whose columns are C phi_z
    """
    assembler = CorrectorAssembler(mh, potential, kappa, beta, quad)
    form = assembler.fine_form
    constraints, _ = drop_redundant_constraints(assembler.coupling)
    loads = form @ assembler.prolongation.toarray()
    rhs = np.vstack([loads.real, loads.imag])

    solution = solve_saddle(
        SaddleSystem(_real_block(form), sp.block_diag([constraints, constraints], format="csr"), rhs, label="ideal")
    )
    n = mh.fine.num_vertices
    return sp.csr_matrix(solution[:n] + 1j * solution[n:])


def corrector_decay_profile(
    mh: MeshHierarchy,
    potential: MagneticPotential,
    kappa: float,
    beta: float,
    element: int,
    ell_max: int,
    coefficients: Tuple[complex, complex, complex] = (1.0, 0.0, 0.0),
    quad: Optional[QuadratureRule] = None,
) -> List[Tuple[int, float]]:
    """
    Measure how fast a corrector decays away from its element.

    Computes C_{T,ell_max} v for v = sum of coefficients times the hats of T and
    reports the a_beta energy of its restriction to the fine elements outside
    N^l(T) for l = 0, ..., ell_max - 1.

    Args:
        mh (MeshHierarchy): The hierarchy
        potential (MagneticPotential): Magnetic potential A
        kappa (float): Ginzburg-Landau parameter
        beta (float): Stabilization shift
        element (int): Coarse element T
        ell_max (int): Layers of the near-ideal reference corrector
        coefficients (Tuple[complex, complex, complex]): Coefficients of the local hats
        quad (QuadratureRule, optional): Quadrature rule

    Returns:
        List[Tuple[int, float]]: Pairs (l, tail energy), nonincreasing in l
    """
    assembler = CorrectorAssembler(mh, potential, kappa, beta, quad)
    result = assembler.local_correctors(element, ell_max)

    corrector = np.zeros(mh.fine.num_vertices, dtype=complex)
    corrector[result.patch.fine_interior_vertices] = result.values @ np.asarray(coefficients, dtype=complex)

    local_values = corrector[mh.fine.triangles]
    element_energy = np.real(
        np.einsum("mr,mrc,mc->m", local_values.conj(), assembler.fine_local, local_values)
    )
    element_energy = np.maximum(element_energy, 0.0)

    distance = layer_distances(mh.coarse, element)[mh.parent_of()]
    profile = []
    for ell in range(ell_max):
        tail = float(np.sqrt(np.sum(element_energy[distance > ell])))
        profile.append((ell, tail))
    logger.info(
        f"Decay profile of element {element} (kappa={kappa}, beta={beta}, ell_max={ell_max}): "
        f"tail {profile[0][1]:.3e} -> {profile[-1][1]:.3e}"
    )
    return profile
