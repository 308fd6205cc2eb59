"""
Energy Minimization Module

This module provides functionality to compute discrete minimizers of the
Ginzburg-Landau energy in a fine P1, coarse P1 or LOD space by Sobolev
gradient descent: the search direction is the Riesz representative of E'(v)
in the H^1_kappa inner product of the active space, and the step size comes
from Armijo backtracking.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from typing_extensions import Literal

from ..assembly.fields import ComplexField, FormOperator, SpaceMap
from ..assembly.potential import get_potential
from ..assembly.transfer import coarse_space_map, fine_space_map
from ..glenergy.energy import EnergyContext, build_energy_context, energy, gle_residual, gradient
from ..lodspace.space import LodSpace, build_lod_space
from ..mesh.hierarchy import MeshHierarchy, build_hierarchy
from ..utils.errors import LineSearchError, PhaseAlignmentError

logger = logging.getLogger(__name__)

SpaceKind = Literal["fine_fem", "coarse_fem", "lod"]
StopReason = Literal["tolerance", "max_iters"]

SPACE_KINDS = ("fine_fem", "coarse_fem", "lod")

_LCG_MULTIPLIER = 6364136223846793005
_LCG_INCREMENT = 1442695040888963407
_MASK64 = (1 << 64) - 1


@dataclass
class StepConfig:
    """
    Armijo backtracking parameters.

    Attributes:
        initial_step (float): First trial step of every iteration
        backtrack (float): Factor applied on rejection
        armijo (float): Sufficient-decrease constant c
        min_step (float): Smallest admissible step
    """

    initial_step: float = 1.0
    backtrack: float = 0.5
    armijo: float = 1e-4
    min_step: float = 1e-14


@dataclass
class MinimizeConfig:
    """
    Settings of one minimization run.

    Attributes:
        space (SpaceKind): Active space
        kappa (float): Ginzburg-Landau parameter
        beta (float): Stabilization of the LOD corrector form
        ell (int): LOD patch layers
        coarse_k (int): Coarse level exponent
        fine_k (int): Fine level exponent
        delta (float): Energy-difference tolerance
        max_iters (int): Iteration cap
        seed (int): Seed of the initial guess
        potential (str): Name of the magnetic potential
        step (StepConfig): Line-search parameters
        max_workers (Optional[int]): Threads for the corrector problems
    """

    space: str = "fine_fem"
    kappa: float = 8.0
    beta: float = 0.0
    ell: int = 4
    coarse_k: int = 3
    fine_k: int = 7
    delta: float = 1e-10
    max_iters: int = 200000
    seed: int = 0
    potential: str = "trig"
    step: StepConfig = field(default_factory=StepConfig)
    max_workers: Optional[int] = None

    def validate(self):
        """
        Check the invariants of the configuration.

        Raises:
            ValueError: If a setting is out of range
        """
        if self.space not in SPACE_KINDS:
            raise ValueError(f"Unknown space '{self.space}', expected one of {SPACE_KINDS}")
        if self.kappa <= 0:
            raise ValueError(f"kappa must be positive, got {self.kappa}")
        if self.beta < 0:
            raise ValueError(f"beta must be non-negative, got {self.beta}")
        if self.ell < 1:
            raise ValueError(f"ell must be at least 1, got {self.ell}")
        if self.delta <= 0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be at least 1, got {self.max_iters}")
        if not 0 < self.step.backtrack < 1 or not 0 < self.step.armijo < 1:
            raise ValueError("Backtracking factor and Armijo constant must lie in (0, 1)")


@dataclass
class MinimizeResult:
    """
    Outcome of a minimization.

    Attributes:
        u (ComplexField): Final iterate in the active space
        energy (float): E(u)
        iters (int): Accepted descent steps
        energy_trace (List[float]): Energy after every accepted step, starting with the initial energy
        stop_reason (StopReason): "tolerance" or "max_iters"
        residual (float): Dual norm of E'(u)
    """

    u: ComplexField
    energy: float
    iters: int
    energy_trace: List[float]
    stop_reason: str
    residual: float

    @property
    def converged(self) -> bool:
        return self.stop_reason == "tolerance"


def initial_guess(space: SpaceMap, seed: int) -> ComplexField:
    """
    Deterministic pseudo-random coefficients with nodal modulus at most 1.

    A 64-bit linear congruential generator x <- (6364136223846793005 x +
    1442695040888963407) mod 2^64 seeded with `seed` yields u = top 53 bits / 2^53
    in [0, 1), mapped to 2u - 1. Each coefficient draws its real part, then its
    imaginary part, and is scaled onto the unit circle when its modulus exceeds 1.

    Args:
        space (SpaceMap): Active space
        seed (int): Generator seed

    Returns:
        ComplexField: The initial field
    """
    state = seed & _MASK64
    draws = np.empty(2 * space.dim)
    for index in range(draws.size):
        state = (_LCG_MULTIPLIER * state + _LCG_INCREMENT) & _MASK64
        draws[index] = 2.0 * ((state >> 11) / float(1 << 53)) - 1.0

    re, im = draws[0::2], draws[1::2]
    modulus = np.hypot(re, im)
    scale = np.where(modulus > 1.0, 1.0 / np.maximum(modulus, 1.0), 1.0)
    return ComplexField(space.space_id, re * scale, im * scale)


def align_phase(u: ComplexField, reference: ComplexField, mass: FormOperator) -> ComplexField:
    """
    Rotate u by the phase alpha/|alpha| with alpha = integral(reference conj(u)).

    Args:
        u (ComplexField): Field to rotate
        reference (ComplexField): Reference field in the same space
        mass (FormOperator): Mass operator of that space

    Returns:
        ComplexField: The rotated field, with integral(reference conj(result)) real and non-negative

    Raises:
        PhaseAlignmentError: If alpha vanishes
    """
    reference.check_space(u.space_id)
    mass_matrix = mass.S
    weighted = mass_matrix @ reference.values
    alpha = np.vdot(u.values, weighted)

    scale = np.sqrt(abs(np.vdot(u.values, mass_matrix @ u.values)) * abs(np.vdot(reference.values, weighted)))
    if abs(alpha) <= 1e-14 * scale or abs(alpha) == 0.0:
        raise PhaseAlignmentError(f"Overlap {abs(alpha):.3e} with the reference vanishes; phase is undefined")
    return u.scaled(alpha / abs(alpha))


def space_map_for(config: MinimizeConfig, mh: MeshHierarchy, lod_space: Optional[LodSpace] = None) -> SpaceMap:
    """
    Fine representation of the active space named by the configuration.

    Args:
        config (MinimizeConfig): Run settings
        mh (MeshHierarchy): Hierarchy matching the configuration levels
        lod_space (LodSpace, optional): Prebuilt LOD space; built on demand otherwise

    Returns:
        SpaceMap: The map
    """
    if config.space == "fine_fem":
        return fine_space_map(mh)
    if config.space == "coarse_fem":
        return coarse_space_map(mh)
    if lod_space is None:
        lod_space = build_lod_space(
            mh, get_potential(config.potential), config.kappa, config.beta, config.ell, max_workers=config.max_workers
        )
    return lod_space.space_map


def context_for_config(
    config: MinimizeConfig, mh: Optional[MeshHierarchy] = None, lod_space: Optional[LodSpace] = None
) -> EnergyContext:
    """Build the hierarchy (if needed), the active space and its energy context."""
    config.validate()
    mh = mh or build_hierarchy(config.coarse_k, config.fine_k)
    space_map = space_map_for(config, mh, lod_space)
    return build_energy_context(mh, get_potential(config.potential), config.kappa, space_map)


def minimize(
    config: MinimizeConfig,
    context: Optional[EnergyContext] = None,
    initial: Optional[ComplexField] = None,
) -> MinimizeResult:
    """
    Minimize the energy by H^1_kappa-preconditioned gradient descent.

    Iterates v <- v - tau G^-1 E'(v) with G the H^1_kappa Gram matrix of the
    active space and tau from Armijo backtracking, until the energy decrease of
    an accepted step drops below config.delta.

    Args:
        config (MinimizeConfig): Run settings
        context (EnergyContext, optional): Prebuilt context for the configured space
        initial (ComplexField, optional): Starting field; seeded random guess otherwise

    Returns:
        MinimizeResult: Final state and diagnostics

    Raises:
        LineSearchError: If the step underflows while a decrease is still predicted
    """
    config.validate()
    ctx = context or context_for_config(config)
    v = initial if initial is not None else initial_guess(ctx.space_map, config.seed)
    v.check_space(ctx.space_id)
    step = config.step

    current = energy(ctx, v)
    trace = [current]
    stop_reason = "max_iters"
    iters = 0
    logger.info(f"Minimizing in {ctx.space_id} (kappa={config.kappa}, {ctx.dim} complex dofs), E0={current:.10e}")

    while iters < config.max_iters:
        load = gradient(ctx, v).stacked()
        direction = ctx.gram_solver(load)
        slope = float(load @ direction)
        if slope <= 0.0:
            stop_reason = "tolerance"
            break

        tau = step.initial_step
        accepted = None
        while accepted is None:
            predicted = step.armijo * tau * slope
            if predicted < 4.0 * np.spacing(abs(current)):
                break
            if tau < step.min_step:
                logger.error(f"Line search underflow at iteration {iters} (tau={tau:.3e}, slope={slope:.3e})")
                raise LineSearchError(
                    f"Step size underflow at iteration {iters} with predicted decrease {predicted:.3e}",
                    trace=trace,
                    residual=np.sqrt(slope),
                )
            trial = ComplexField.from_stacked(ctx.space_id, v.stacked() - tau * direction)
            trial_energy = energy(ctx, trial)
            if trial_energy <= current - predicted:
                accepted = (trial, trial_energy)
            else:
                tau *= step.backtrack

        if accepted is None:
            stop_reason = "tolerance"
            logger.debug(f"No representable decrease left at iteration {iters}")
            break

        v, new_energy = accepted
        decrease = current - new_energy
        current = new_energy
        trace.append(current)
        iters += 1

        if iters % 1000 == 0:
            logger.info(f"Iteration {iters}: E={current:.12e}, dE={decrease:.3e}, tau={tau:.3e}")
        else:
            logger.debug(f"Iteration {iters}: E={current:.12e}, dE={decrease:.3e}, tau={tau:.3e}")

        if abs(decrease) < config.delta:
            stop_reason = "tolerance"
            break

    if stop_reason == "max_iters":
        logger.warning(f"Minimization in {ctx.space_id} stopped after max_iters={config.max_iters}")

    residual = gle_residual(ctx, v)
    logger.info(f"Finished in {ctx.space_id}: E={current:.10e}, iters={iters}, residual={residual:.3e} ({stop_reason})")
    return MinimizeResult(
        u=v, energy=current, iters=iters, energy_trace=trace, stop_reason=stop_reason, residual=residual
    )
