"""
Experiment Runner Module

This module provides functionality shared by the sweep commands: fine
reference minimizers, LOD spaces with an optional on-disk cache, and
minimization of coarse FEM and LOD approximations measured against a
reference.
"""
import concurrent.futures
import logging
import os
from dataclasses import dataclass
from typing import Callable, Dict, Iterable, Optional, Tuple, TypeVar

from ..analysis.errors import ErrorRecord, best_approximation_error, error_h1k, error_l2
from ..assembly.fields import ComplexField
from ..assembly.potential import get_potential
from ..assembly.transfer import coarse_space_map, fine_space_map, l2_project_coarse
from ..field_utils.fieldfile import read_field, write_field
from ..glenergy.energy import EnergyContext, build_energy_context
from ..lodspace.space import LodSpace, build_lod_space, load_lod_space, lod_cache_key, save_lod_space
from ..mesh.hierarchy import MeshHierarchy, build_hierarchy
from ..minimize.descent import MinimizeConfig, MinimizeResult, align_phase, minimize
from ..utils.config import ExperimentConfig

logger = logging.getLogger(__name__)

T = TypeVar("T")
K = TypeVar("K")


@dataclass
class Reference:
    """
    Fine minimizer used as the error reference of one (kappa, seed) pair.

    Attributes:
        kappa (float): Ginzburg-Landau parameter
        seed (int): Seed of the initial guess
        context (EnergyContext): Fine P1 context on which the reference lives
        result (MinimizeResult): Descent outcome
        path (Optional[str]): Field file the reference was stored to or loaded from
    """

    kappa: float
    seed: int
    context: EnergyContext
    result: MinimizeResult
    path: Optional[str] = None

    @property
    def u(self) -> ComplexField:
        return self.result.u


def run_ordered(jobs: Dict[K, Callable[[], T]], max_workers: Optional[int] = None) -> Dict[K, T]:
    """
    Run independent jobs in a thread pool and collect their results in submission order.

    Exceptions are logged and re-raised.

    Args:
        jobs (Dict[K, Callable[[], T]]): Job key to zero-argument callable
        max_workers (int, optional): Pool size

    Returns:
        Dict[K, T]: Results keyed like `jobs`, in the same order
    """
    results: Dict[K, T] = {}
    with concurrent.futures.ThreadPoolExecutor(max_workers=max_workers) as executor:
        future_to_key = {executor.submit(job): key for key, job in jobs.items()}
        for future, key in future_to_key.items():
            try:
                results[key] = future.result()
            except Exception as e:
                logger.error(f"Job {key} failed: {str(e)}")
                raise
    return results


def hierarchy_for(exp: ExperimentConfig, coarse_k: Optional[int] = None) -> MeshHierarchy:
    """Hierarchy between coarse_k (the smallest configured level when omitted) and fine_k."""
    return build_hierarchy(min(exp.coarse_ks) if coarse_k is None else coarse_k, exp.fine_k)


def fine_context(exp: ExperimentConfig, kappa: float, mh: Optional[MeshHierarchy] = None) -> EnergyContext:
    """Energy context of the fine P1 space; its fine operators are shared by every space of this kappa."""
    mh = mh or hierarchy_for(exp)
    return build_energy_context(mh, get_potential(exp.potential), kappa, fine_space_map(mh))


def minimize_config(exp: ExperimentConfig, space: str, kappa: float, seed: int, **overrides) -> MinimizeConfig:
    settings = dict(
        space=space,
        kappa=kappa,
        seed=seed,
        fine_k=exp.fine_k,
        delta=exp.delta,
        max_iters=exp.max_iters,
        potential=exp.potential,
    )
    settings.update(overrides)
    return MinimizeConfig(**settings)


def reference_path(exp: ExperimentConfig, kappa: float, seed: int) -> str:
    return os.path.join(exp.out_dir, f"ref_k{kappa:g}_f{exp.fine_k}_s{seed}_{exp.potential}.glf")


def _reference_metadata(exp: ExperimentConfig, kappa: float, seed: int) -> Dict[str, object]:
    return {
        "space": "fine_fem",
        "kappa": kappa,
        "beta": 0.0,
        "ell": 0,
        "seed": seed,
        "fine_k": exp.fine_k,
        "delta": exp.delta,
        "potential": exp.potential,
    }


def compute_reference(exp: ExperimentConfig, kappa: float, seed: int, ctx: Optional[EnergyContext] = None) -> Reference:
    """
    Fine P1 minimizer for (kappa, seed), reusing a stored field file with matching settings.

    Args:
        exp (ExperimentConfig): Sweep settings
        kappa (float): Ginzburg-Landau parameter
        seed (int): Seed of the initial guess
        ctx (EnergyContext, optional): Fine context to reuse

    Returns:
        Reference: The reference minimizer
    """
    ctx = ctx or fine_context(exp, kappa)
    path = reference_path(exp, kappa, seed)
    expected = _reference_metadata(exp, kappa, seed)
    config = minimize_config(exp, "fine_fem", kappa, seed)

    initial = None
    if os.path.exists(path):
        stored = read_field(path)
        if stored.level == exp.fine_k and all(stored.metadata.get(key) == value for key, value in expected.items()):
            logger.info(f"Reusing reference {path} as starting point")
            initial = ComplexField(ctx.space_id, stored.field.re, stored.field.im)
        else:
            logger.warning(f"Stored reference {path} has different settings and will be recomputed")

    result = minimize(config, context=ctx, initial=initial)
    metadata = dict(expected, energy=result.energy, iters=result.iters, residual=result.residual)
    write_field(path, result.u, exp.fine_k, metadata)
    return Reference(kappa=kappa, seed=seed, context=ctx, result=result, path=path)


def compute_references(exp: ExperimentConfig) -> Dict[Tuple[float, int], Reference]:
    """References for every (kappa, seed) of the sweep, one fine context per kappa."""
    contexts = {kappa: fine_context(exp, kappa) for kappa in exp.kappas}
    jobs = {
        (kappa, seed): (lambda kappa=kappa, seed=seed: compute_reference(exp, kappa, seed, contexts[kappa]))
        for kappa in exp.kappas
        for seed in exp.seeds
    }
    return run_ordered(jobs, exp.max_workers)


def lod_space_for(exp: ExperimentConfig, mh: MeshHierarchy, kappa: float, beta: float, ell: int) -> LodSpace:
    """
    LOD space for the given parameters, loaded from or stored to exp.cache_dir when set.

    Args:
        exp (ExperimentConfig): Sweep settings
        mh (MeshHierarchy): Hierarchy of the coarse level
        kappa (float): Ginzburg-Landau parameter
        beta (float): Stabilization
        ell (int): Patch layers

    Returns:
        LodSpace: The space
    """
    potential = get_potential(exp.potential)
    if exp.cache_dir:
        path = os.path.join(
            exp.cache_dir, lod_cache_key(mh.coarse_level, mh.fine_level, kappa, beta, ell, 4, potential.name)
        )
        if os.path.exists(path):
            return load_lod_space(path, mh)
        space = build_lod_space(mh, potential, kappa, beta, ell, max_workers=exp.max_workers)
        save_lod_space(space, path)
        return space
    return build_lod_space(mh, potential, kappa, beta, ell, max_workers=exp.max_workers)


def projected_start(mh: MeshHierarchy, reference: ComplexField, space_id: str) -> ComplexField:
    """pi_h of the reference, carried over to any space with coarse-vertex coefficients."""
    coarse = l2_project_coarse(mh, reference)
    return ComplexField(space_id, coarse.re, coarse.im)


def measure(
    record: ErrorRecord, ctx: EnergyContext, result: MinimizeResult, reference: Reference
) -> ErrorRecord:
    """Fill the error fields of a record after aligning the fine expansion of the result to the reference."""
    fine_ctx = reference.context
    u_fine = ctx.expand(result.u)
    aligned = align_phase(u_fine, reference.u, fine_ctx.fine_mass)
    record.err_h1k = error_h1k(aligned, reference.u, fine_ctx.fine.gram, fine_ctx.fine_mass)
    record.err_l2 = error_l2(aligned, reference.u, fine_ctx.fine_mass)
    record.energy = result.energy
    record.energy_ref = reference.result.energy
    record.iters = result.iters
    if not result.converged:
        record.status = "max_iters"
    return record


def approximate(
    exp: ExperimentConfig,
    mh: MeshHierarchy,
    reference: Reference,
    space: str,
    beta: float = 0.0,
    ell: int = 0,
    lod_space: Optional[LodSpace] = None,
) -> ErrorRecord:
    """
    Minimize in a coarse FEM or LOD space and measure the result against the reference.

    Failures are recorded in the status column instead of propagating.

    Args:
        exp (ExperimentConfig): Sweep settings
        mh (MeshHierarchy): Hierarchy of the coarse level
        reference (Reference): Fine reference
        space (str): "coarse_fem" or "lod"
        beta (float): Stabilization of the LOD space
        ell (int): Patch layers of the LOD space
        lod_space (LodSpace, optional): Prebuilt LOD space

    Returns:
        ErrorRecord: The row
    """
    record = ErrorRecord(
        space=space,
        kappa=reference.kappa,
        beta=beta,
        ell=ell,
        coarse_h=mh.coarse.h,
        fine_h=mh.fine.h,
        seed=reference.seed,
    )
    try:
        if space == "lod":
            lod_space = lod_space or lod_space_for(exp, mh, reference.kappa, beta, ell)
            space_map = lod_space.space_map
        else:
            space_map = coarse_space_map(mh)
        ctx = reference.context.with_space(space_map)

        gram = reference.context.fine.gram
        record.err_best = best_approximation_error(lod_space if space == "lod" else space_map, reference.u, gram)

        initial = projected_start(mh, reference.u, ctx.space_id) if exp.warm_start else None
        config = minimize_config(
            exp, space, reference.kappa, reference.seed, beta=beta, ell=max(ell, 1), coarse_k=mh.coarse_level
        )
        result = minimize(config, context=ctx, initial=initial)
        measure(record, ctx, result, reference)
        logger.info(
            f"{space} kappa={reference.kappa:g} beta={beta:g} ell={ell} h={mh.coarse.h:g} seed={reference.seed}: "
            f"err_h1k={record.err_h1k:.4e}, err_best={record.err_best:.4e}"
        )
    except Exception as e:
        logger.error(f"{space} run at h={mh.coarse.h:g}, beta={beta:g}, ell={ell} failed: {str(e)}")
        record.status = f"error: {type(e).__name__}: {str(e)}"
    return record


def grid(exp: ExperimentConfig) -> Iterable[Tuple[float, float, int, int]]:
    """(kappa, beta, ell, coarse_k) in deterministic sweep order."""
    for kappa in exp.kappas:
        for beta in exp.betas:
            for ell in exp.ells:
                for coarse_k in sorted(exp.coarse_ks):
                    yield kappa, beta, ell, coarse_k
