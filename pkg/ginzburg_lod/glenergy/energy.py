"""
Ginzburg-Landau Energy Module

This module provides functionality to evaluate the Ginzburg-Landau energy

    E(v) = 1/2 integral |i/kappa grad v + A v|^2 + 1/4 integral (|v|^2 - 1)^2,

its first derivative and its Hessian for fields given in any active space
(fine P1, coarse P1 or LOD). Every integral is taken on the fine mesh after
expanding the field through the space map of the context.
"""
import logging
from functools import cached_property
from typing import Callable, Optional

import numpy as np

from ..assembly.fields import ComplexField, FormOperator, SpaceMap
from ..assembly.forms import (
    assemble_abeta,
    assemble_h1k_gram,
    assemble_load,
    assemble_mass,
    assemble_reaction,
    integrate,
    quadrature_values,
)
from ..assembly.potential import MagneticPotential
from ..assembly.quadrature import QuadratureRule, get_quadrature
from ..linsolve.solvers import spd_solver
from ..mesh.hierarchy import MeshHierarchy

logger = logging.getLogger(__name__)


class FineOperators:
    """
    Fine-mesh operators shared by all active spaces of one kappa.

    Attributes:
        mh (MeshHierarchy): The hierarchy
        potential (MagneticPotential): Magnetic potential A
        kappa (float): Ginzburg-Landau parameter
        quad (QuadratureRule): Rule for A-dependent and quartic terms
    """

    def __init__(
        self, mh: MeshHierarchy, potential: MagneticPotential, kappa: float, quad: Optional[QuadratureRule] = None
    ):
        self.mh = mh
        self.potential = potential
        self.kappa = kappa
        self.quad = quad or get_quadrature(4)

    @cached_property
    def quadratic_op(self) -> FormOperator:
        """a_0 on the fine mesh."""
        return assemble_abeta(self.mh.fine, self.potential, self.kappa, 0.0, self.quad)

    @cached_property
    def mass(self) -> FormOperator:
        return assemble_mass(self.mh.fine)

    @cached_property
    def gram(self) -> FormOperator:
        return assemble_h1k_gram(self.mh.fine, self.kappa)


class EnergyContext:
    """
    Energy evaluation in an active space.

    Attributes:
        fine (FineOperators): Shared fine operators
        space_map (SpaceMap): Map from active coefficients to fine coefficients
    """

    def __init__(self, fine: FineOperators, space_map: SpaceMap):
        self.fine = fine
        self.space_map = space_map

    def __repr__(self) -> str:
        return f"EnergyContext(space='{self.space_id}', kappa={self.kappa})"

    @property
    def mh(self) -> MeshHierarchy:
        return self.fine.mh

    @property
    def kappa(self) -> float:
        return self.fine.kappa

    @property
    def potential(self) -> MagneticPotential:
        return self.fine.potential

    @property
    def space_id(self) -> str:
        return self.space_map.space_id

    @property
    def dim(self) -> int:
        return self.space_map.dim

    @property
    def quadratic_op(self) -> FormOperator:
        return self.fine.quadratic_op

    @property
    def fine_mass(self) -> FormOperator:
        return self.fine.mass

    def with_space(self, space_map: SpaceMap) -> "EnergyContext":
        """Context for another active space on the same fine operators."""
        return EnergyContext(self.fine, space_map)

    @cached_property
    def mass(self) -> FormOperator:
        """L2 Gram matrix of the active space."""
        return self.space_map.restrict_operator(self.fine.mass)

    @cached_property
    def gram(self) -> FormOperator:
        """H^1_kappa Gram matrix of the active space."""
        return self.space_map.restrict_operator(self.fine.gram)

    @cached_property
    def mass_solver(self) -> Callable[[np.ndarray], np.ndarray]:
        return spd_solver(self.mass, method="direct", label=f"mass of {self.space_id}")

    @cached_property
    def gram_solver(self) -> Callable[[np.ndarray], np.ndarray]:
        return spd_solver(self.gram, method="direct", label=f"H1_kappa Gram of {self.space_id}")

    def expand(self, v: ComplexField) -> ComplexField:
        return self.space_map.expand(v)

    def zeros(self) -> ComplexField:
        return ComplexField.zeros(self.space_id, self.dim)


def build_energy_context(
    mh: MeshHierarchy,
    potential: MagneticPotential,
    kappa: float,
    space_map: SpaceMap,
    quad: Optional[QuadratureRule] = None,
) -> EnergyContext:
    """
    Create an energy context for an active space.

    Args:
        mh (MeshHierarchy): The hierarchy
        potential (MagneticPotential): Magnetic potential A
        kappa (float): Ginzburg-Landau parameter
        space_map (SpaceMap): Fine representation of the active space
        quad (QuadratureRule, optional): Quadrature rule (default degree 4)

    Returns:
        EnergyContext: The context
    """
    if kappa <= 0:
        raise ValueError(f"kappa must be positive, got {kappa}")
    if space_map.fine_dim != mh.fine.num_vertices:
        raise ValueError(
            f"Space map targets {space_map.fine_dim} fine dofs, mesh has {mh.fine.num_vertices} vertices"
        )
    return EnergyContext(FineOperators(mh, potential, kappa, quad), space_map)


def _fine_state(ctx: EnergyContext, v: ComplexField) -> ComplexField:
    v.check_space(ctx.space_id)
    return ctx.expand(v)


def energy(ctx: EnergyContext, v: ComplexField) -> float:
    """
    Evaluate E(v) = 1/2 a_0(V, V) + 1/4 integral (|V|^2 - 1)^2 with V the fine representation of v.

    Args:
        ctx (EnergyContext): The context
        v (ComplexField): Field in the active space

    Returns:
        float: The energy

    Raises:
        SpaceMismatchError: If v is not in the active space
    """
    V = _fine_state(ctx, v)
    quad = ctx.fine.quad
    mesh = ctx.mh.fine
    density = quadrature_values(mesh, V.re, quad) ** 2 + quadrature_values(mesh, V.im, quad) ** 2
    quartic = integrate(mesh, (density - 1.0) ** 2, quad)
    return 0.5 * ctx.quadratic_op.quadratic(V) + 0.25 * quartic


def _fine_gradient(ctx: EnergyContext, V: ComplexField) -> np.ndarray:
    quad = ctx.fine.quad
    mesh = ctx.mh.fine
    p = quadrature_values(mesh, V.re, quad)
    q = quadrature_values(mesh, V.im, quad)
    shift = p ** 2 + q ** 2 - 1.0
    nonlinear = np.concatenate([assemble_load(mesh, shift * p, quad), assemble_load(mesh, shift * q, quad)])
    return ctx.quadratic_op.apply(V) + nonlinear


def gradient(ctx: EnergyContext, v: ComplexField) -> ComplexField:
    """
    Coefficients of the functional <E'(v), .> on the active space.

    For any w in the active space <E'(v), w> = gradient(ctx, v).stacked() @ w.stacked().

    Args:
        ctx (EnergyContext): The context
        v (ComplexField): Field in the active space

    Returns:
        ComplexField: Load vector in the active space
    """
    V = _fine_state(ctx, v)
    return ComplexField.from_stacked(ctx.space_id, ctx.space_map.restrict(_fine_gradient(ctx, V)))


def hessian_operator(ctx: EnergyContext, v: ComplexField) -> FormOperator:
    """
    Assemble E''(v) on the active space.

    The fine operator is a_0 plus the reaction blocks of
    ((|v|^2 - 1) z + v^2 conj(z) + |v|^2 z, w); the v^2 conj(z) term couples
    the real and imaginary blocks symmetrically.

    Args:
        ctx (EnergyContext): The context
        v (ComplexField): Field in the active space

    Returns:
        FormOperator: Symmetric operator of kind "hessian"
    """
    V = _fine_state(ctx, v)
    reaction = assemble_reaction(ctx.mh.fine, V, ctx.fine.quad)
    fine_hessian = FormOperator(
        "hessian", ctx.quadratic_op.matrix + reaction.matrix, V.space_id, {"kappa": ctx.kappa}
    )
    return ctx.space_map.restrict_operator(fine_hessian)


def dual_norm(ctx: EnergyContext, load: ComplexField) -> float:
    """L2 dual norm sqrt(g^T M^-1 g) of a load vector over the active space."""
    load.check_space(ctx.space_id)
    stacked = load.stacked()
    return float(np.sqrt(max(stacked @ ctx.mass_solver(stacked), 0.0)))


def gle_residual(ctx: EnergyContext, v: ComplexField) -> float:
    """
    Dual norm of E'(v) over the active space; zero exactly at discrete critical points.

    Args:
        ctx (EnergyContext): The context
        v (ComplexField): Field in the active space

    Returns:
        float: The residual
    """
    return dual_norm(ctx, gradient(ctx, v))
