"""
Forms Module

This module provides functionality to assemble P1 finite element operators on a
TriMesh: mass, stiffness, the magnetic form a_beta, the H^1_kappa Gram matrix
and the nonlinear reaction blocks of the energy Hessian, together with
quadrature helpers for loads and integrals.

All element loops are vectorized. Local matrices are indexed [element, test, trial]
and merged by COO duplicate summation.
"""
import logging
from typing import Optional

import numpy as np
import scipy.sparse as sp

from ..mesh.hierarchy import TriMesh
from .fields import ComplexField, FormOperator
from .potential import MagneticPotential
from .quadrature import QuadratureRule, get_quadrature

logger = logging.getLogger(__name__)

_REFERENCE_MASS = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 12.0


def p1_space_id(level: int) -> str:
    """Identifier of the P1 space on the structured mesh of the given level."""
    return f"p1:{level}"


def _select(mesh: TriMesh, elements: Optional[np.ndarray]) -> np.ndarray:
    if elements is None:
        return np.arange(mesh.num_elements)
    return np.asarray(elements, dtype=np.int64)


def local_mass(mesh: TriMesh, elements: Optional[np.ndarray] = None) -> np.ndarray:
    """Element mass matrices |T|/12 [[2,1,1],[1,2,1],[1,1,2]], shape (M, 3, 3)."""
    elements = _select(mesh, elements)
    return mesh.areas[elements, None, None] * _REFERENCE_MASS[None]


def local_stiffness(mesh: TriMesh, elements: Optional[np.ndarray] = None) -> np.ndarray:
    elements = _select(mesh, elements)
    grads = mesh.gradients[elements]
    return mesh.areas[elements, None, None] * np.einsum("mrd,mcd->mrc", grads, grads)


def local_weighted_mass(
    mesh: TriMesh, weights_q: np.ndarray, quad: QuadratureRule, elements: Optional[np.ndarray] = None
) -> np.ndarray:
    """
    Element matrices of the weighted mass form integral(f phi_r phi_c).

    Args:
        mesh (TriMesh): The mesh
        weights_q (np.ndarray): Weight f at the quadrature points, shape (M, Q)
        quad (QuadratureRule): Quadrature rule
        elements (np.ndarray, optional): Element subset matching weights_q rows

    Returns:
        np.ndarray: Local matrices, shape (M, 3, 3)
    """
    elements = _select(mesh, elements)
    scale = 2.0 * mesh.areas[elements]
    return np.einsum("m,q,mq,qr,qc->mrc", scale, quad.weights, weights_q, quad.points, quad.points)


def local_abeta(
    mesh: TriMesh,
    potential: MagneticPotential,
    kappa: float,
    beta: float,
    quad: QuadratureRule,
    elements: Optional[np.ndarray] = None,
) -> np.ndarray:
    """
    Element Hermitian matrices H[r, c] = a_beta(phi_c, phi_r) restricted to each element.

    The real part is kappa^-2 stiffness + |A|^2-weighted mass + beta mass and the
    imaginary part is (D - D^T)/kappa with D[r, c] = integral(phi_r A . grad phi_c).

    Returns:
        np.ndarray: Complex local matrices, shape (M, 3, 3)
    """
    elements = _select(mesh, elements)
    corners = mesh.vertices[mesh.triangles[elements]]
    values = potential(quad.physical_points(corners))
    grads = mesh.gradients[elements]
    scale = 2.0 * mesh.areas[elements]

    a_squared = np.einsum("mqd,mqd->mq", values, values)
    real = (
        local_stiffness(mesh, elements) / kappa ** 2
        + local_weighted_mass(mesh, a_squared, quad, elements)
        + beta * local_mass(mesh, elements)
    )
    drift = np.einsum("m,q,qr,mqd,mcd->mrc", scale, quad.weights, quad.points, values, grads)
    imag = (drift - np.transpose(drift, (0, 2, 1))) / kappa
    return real + 1j * imag


def assemble_local(mesh: TriMesh, local: np.ndarray, elements: Optional[np.ndarray] = None) -> sp.csr_matrix:
    """
    Scatter local matrices into a global sparse matrix.

    Args:
        mesh (TriMesh): The mesh
        local (np.ndarray): Local matrices, shape (M, 3, 3), indexed [element, test, trial]
        elements (np.ndarray, optional): Element ids of the local matrices

    Returns:
        sp.csr_matrix: Global matrix, shape (num_vertices, num_vertices)
    """
    elements = _select(mesh, elements)
    dofs = mesh.triangles[elements]
    rows = np.repeat(dofs, 3, axis=1).ravel()
    cols = np.tile(dofs, (1, 3)).ravel()
    n = mesh.num_vertices
    return sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def quadrature_values(mesh: TriMesh, coefficients: np.ndarray, quad: QuadratureRule) -> np.ndarray:
    """Values of a P1 function at the quadrature points of every element, shape (M, Q)."""
    return np.asarray(coefficients)[mesh.triangles] @ quad.points.T


def integrate(mesh: TriMesh, values_q: np.ndarray, quad: QuadratureRule) -> float:
    """Integral over the domain of a function given at the quadrature points."""
    return float(np.sum(2.0 * mesh.areas * (values_q @ quad.weights)))


def assemble_load(mesh: TriMesh, values_q: np.ndarray, quad: QuadratureRule) -> np.ndarray:
    """Load vector integral(f phi_j) for f given at the quadrature points."""
    local = np.einsum("m,q,mq,qr->mr", 2.0 * mesh.areas, quad.weights, values_q, quad.points)
    return np.bincount(mesh.triangles.ravel(), weights=local.ravel(), minlength=mesh.num_vertices)


def assemble_mass(mesh: TriMesh) -> FormOperator:
    """
    Assemble the P1 mass matrix.

    Args:
        mesh (TriMesh): The mesh

    Returns:
        FormOperator: Mass operator with K = 0
    """
    mass = assemble_local(mesh, local_mass(mesh))
    return FormOperator.from_blocks("mass", mass, space_id=p1_space_id(mesh.level))


def assemble_stiffness(mesh: TriMesh) -> FormOperator:
    stiffness = assemble_local(mesh, local_stiffness(mesh))
    return FormOperator.from_blocks("stiffness", stiffness, space_id=p1_space_id(mesh.level))


def assemble_abeta(
    mesh: TriMesh,
    potential: MagneticPotential,
    kappa: float,
    beta: float,
    quad: Optional[QuadratureRule] = None,
) -> FormOperator:
    """
    Assemble the stabilized magnetic form a_beta(v, w) = (i/kappa grad v + A v, i/kappa grad w + A w) + beta (v, w).

    Args:
        mesh (TriMesh): The mesh
        potential (MagneticPotential): Magnetic vector potential A
        kappa (float): Ginzburg-Landau parameter, positive
        beta (float): Stabilization shift, non-negative
        quad (QuadratureRule, optional): Rule of degree at least 4 (default 6-point rule)

    Returns:
        FormOperator: Operator with blocks [[S, -K], [K, S]]

    Raises:
        ValueError: If kappa <= 0, beta < 0 or the rule is not exact of degree 4
    """
    if kappa <= 0:
        raise ValueError(f"kappa must be positive, got {kappa}")
    if beta < 0:
        raise ValueError(f"beta must be non-negative, got {beta}")
    quad = quad or get_quadrature(4)
    if quad.degree < 4:
        raise ValueError(f"a_beta needs a quadrature rule of degree >= 4, got degree {quad.degree}")

    hermitian = assemble_local(mesh, local_abeta(mesh, potential, kappa, beta, quad))
    logger.debug(f"Assembled a_beta on level {mesh.level} (kappa={kappa}, beta={beta}, nnz={hermitian.nnz})")
    return FormOperator.from_hermitian(
        "a_beta",
        hermitian,
        space_id=p1_space_id(mesh.level),
        params={"kappa": kappa, "beta": beta, "potential": potential.name, "quadrature": quad.identifier},
    )


def assemble_h1k_gram(mesh: TriMesh, kappa: float) -> FormOperator:
    """Gram matrix of the scaled norm ||v||^2 + kappa^-2 ||grad v||^2."""
    if kappa <= 0:
        raise ValueError(f"kappa must be positive, got {kappa}")
    gram = assemble_local(mesh, local_mass(mesh) + local_stiffness(mesh) / kappa ** 2)
    return FormOperator.from_blocks("h1k_gram", gram, space_id=p1_space_id(mesh.level), params={"kappa": kappa})


def assemble_reaction(mesh: TriMesh, state: ComplexField, quad: Optional[QuadratureRule] = None) -> FormOperator:
    """
    Assemble the reaction part of the energy Hessian at a state v = p + i q.

    The form Re((|v|^2 - 1) z + v^2 conj(z) + |v|^2 z, w) has the real blocks
    rr: |v|^2 - 1 + 2 p^2, ii: |v|^2 - 1 + 2 q^2 and ri = ir: 2 p q, each as a
    weighted mass matrix. The degree-4 rule integrates all of them exactly.

    Args:
        mesh (TriMesh): Fine mesh carrying the state
        state (ComplexField): Fine P1 state
        quad (QuadratureRule, optional): Quadrature rule (default degree 4)

    Returns:
        FormOperator: Symmetric real block operator of kind "reaction"
    """
    quad = quad or get_quadrature(4)
    p = quadrature_values(mesh, state.re, quad)
    q = quadrature_values(mesh, state.im, quad)
    shift = p ** 2 + q ** 2 - 1.0

    rr = assemble_local(mesh, local_weighted_mass(mesh, shift + 2.0 * p ** 2, quad))
    ii = assemble_local(mesh, local_weighted_mass(mesh, shift + 2.0 * q ** 2, quad))
    ri = assemble_local(mesh, local_weighted_mass(mesh, 2.0 * p * q, quad))
    matrix = sp.bmat([[rr, ri], [ri, ii]], format="csr")
    return FormOperator("reaction", matrix, space_id=state.space_id)
