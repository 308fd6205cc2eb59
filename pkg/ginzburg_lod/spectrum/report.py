"""
Spectrum Report Module

This module provides functionality to compute the smallest eigenvalues of the
energy Hessian E''(u) at a minimizer, in the L2 and in the H^1_kappa metric,
to identify the gauge mode i u, and to fit how the coercivity constant grows
with kappa.
"""
import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Sequence, Tuple, Union

import numpy as np

from ..analysis.errors import least_squares_slope
from ..assembly.fields import ComplexField
from ..glenergy.energy import EnergyContext, energy, gle_residual, hessian_operator
from ..linsolve.eigen import EigenResult, eig_smallest

logger = logging.getLogger(__name__)

EXCLUDED_TREND_KAPPA = 32.0
MAX_REFERENCE_RESIDUAL = 1e-4
GAUGE_OVERLAP_MIN = 0.999
GAUGE_EIGENVALUE_RATIO = 1e-6


@dataclass
class SpectrumReport:
    """
    Smallest eigenvalues of E''(u).

    Attributes:
        kappa (float): Ginzburg-Landau parameter
        energy (float): E(u)
        l2_eigs (np.ndarray): Eigenvalues of (E''(u), mass), gauge mode first
        h1k_eigs (np.ndarray): Eigenvalues of (E''(u), H^1_kappa Gram), gauge mode first
        rho_inv (float): Second H^1_kappa eigenvalue, the coercivity constant
        zero_mode_overlap (float): L2 overlap of the first L2 eigenvector with i u
        converged (bool): Whether both eigensolves met their tolerance
    """

    kappa: float
    energy: float
    l2_eigs: np.ndarray
    h1k_eigs: np.ndarray
    rho_inv: float
    zero_mode_overlap: float
    converged: bool = True

    @property
    def gauge_ok(self) -> bool:
        """First L2 pair is the gauge mode: overlap with i u and a negligible eigenvalue."""
        return bool(
            self.zero_mode_overlap >= GAUGE_OVERLAP_MIN
            and abs(self.l2_eigs[0]) <= GAUGE_EIGENVALUE_RATIO * abs(self.l2_eigs[1])
        )

    def as_row(self) -> Dict[str, Any]:
        row: Dict[str, Any] = {"kappa": self.kappa, "energy": self.energy}
        for index, value in enumerate(self.l2_eigs, start=1):
            row[f"lambda_{index}"] = float(value)
        for index, value in enumerate(self.h1k_eigs, start=1):
            row[f"mu_{index}"] = float(value)
        row["rho_inv"] = self.rho_inv
        row["zero_mode_overlap"] = self.zero_mode_overlap
        row["converged"] = self.converged
        row["gauge_ok"] = self.gauge_ok
        return row


def _gauge_first(result: EigenResult, gauge: np.ndarray, mass_matrix) -> Tuple[np.ndarray, float]:
    weighted = mass_matrix @ gauge
    gauge_norm = np.sqrt(gauge @ weighted)
    overlaps = np.array([
        abs(vector @ weighted) / (np.sqrt(vector @ (mass_matrix @ vector)) * gauge_norm)
        for vector in result.vectors.T
    ])
    first = int(np.argmax(overlaps))
    rest = [index for index in np.argsort(result.values, kind="stable") if index != first]
    return result.values[[first] + rest], float(overlaps[first])


def gauge_mode_residual(ctx: EnergyContext, u: ComplexField) -> float:
    """
    H^1_kappa dual norm of E''(u)(i u); vanishes at exact discrete critical points.

    Args:
        ctx (EnergyContext): The context
        u (ComplexField): Minimizer in the active space

    Returns:
        float: The dual norm
    """
    hessian = hessian_operator(ctx, u)
    image = hessian.apply(u.times_i())
    return float(np.sqrt(max(image @ ctx.gram_solver(image), 0.0)))


def spectrum_at(
    ctx: EnergyContext,
    u: ComplexField,
    k: int = 6,
    tol: float = 1e-8,
    max_residual: float = MAX_REFERENCE_RESIDUAL,
) -> SpectrumReport:
    """
    Compute the k smallest eigenvalues of E''(u) in the L2 and H^1_kappa metrics.

    The gauge mode is the eigenvector with maximal L2 overlap with i u; it is
    reported first, the remaining eigenvalues follow in ascending order.

    Args:
        ctx (EnergyContext): The context
        u (ComplexField): Converged minimizer in the active space
        k (int): Number of eigenvalues per pencil, at least 2
        tol (float): Residual tolerance of the eigensolver
        max_residual (float): Largest admissible dual norm of E'(u)

    Returns:
        SpectrumReport: The report

    Raises:
        ValueError: If k < 2 or u is not a critical point within max_residual
    """
    if k < 2:
        raise ValueError(f"At least 2 eigenvalues are needed for the coercivity constant, got {k}")
    residual = gle_residual(ctx, u)
    if residual > max_residual:
        raise ValueError(f"State is not a critical point: residual {residual:.3e} exceeds {max_residual:.1e}")

    hessian = hessian_operator(ctx, u)
    gauge = u.times_i().stacked()

    try:
        # semidefinite at minimizers
        l2_result = eig_smallest(hessian, ctx.mass, k=k, tol=tol, shift=0.0)
        h1k_result = eig_smallest(hessian, ctx.gram, k=k, tol=tol, shift=0.0)
    except Exception as e:
        logger.error(f"Eigensolver failed for kappa={ctx.kappa}: {str(e)}")
        raise

    mass_matrix = ctx.mass.matrix
    l2_eigs, overlap = _gauge_first(l2_result, gauge, mass_matrix)
    h1k_eigs, _ = _gauge_first(h1k_result, gauge, mass_matrix)
    converged = l2_result.converged and h1k_result.converged

    if not converged:
        logger.warning(f"Spectrum at kappa={ctx.kappa} is only partially converged")
    if overlap < GAUGE_OVERLAP_MIN:
        logger.warning(f"First eigenvector overlaps the gauge mode only by {overlap:.4f}")
    if abs(l2_eigs[0]) > GAUGE_EIGENVALUE_RATIO * abs(l2_eigs[1]):
        logger.warning(f"Gauge eigenvalue {l2_eigs[0]:.3e} is not negligible against {l2_eigs[1]:.3e}")

    report = SpectrumReport(
        kappa=ctx.kappa,
        energy=energy(ctx, u),
        l2_eigs=l2_eigs,
        h1k_eigs=h1k_eigs,
        rho_inv=float(h1k_eigs[1]),
        zero_mode_overlap=overlap,
        converged=converged,
    )
    logger.info(
        f"Spectrum at kappa={ctx.kappa}: lambda_2={l2_eigs[1]:.4e}, rho_inv={report.rho_inv:.4e}, overlap={overlap:.6f}"
    )
    return report


def coercivity_trend(
    reports: Sequence[Union[SpectrumReport, Tuple[float, float]]], include_kappa32: bool = False
) -> float:
    """
    Fit rho(kappa) ~ kappa^alpha by least squares of log rho against log kappa.

    Args:
        reports (Sequence[Union[SpectrumReport, Tuple[float, float]]]): Reports or (kappa, rho_inv) pairs
        include_kappa32 (bool): Keep kappa = 32 in the fit

    Returns:
        float: The exponent alpha

    Raises:
        ValueError: On repeated kappa values or fewer than 2 usable entries
    """
    pairs: List[Tuple[float, float]] = []
    for report in reports:
        if isinstance(report, SpectrumReport):
            pairs.append((report.kappa, report.rho_inv))
        else:
            pairs.append((float(report[0]), float(report[1])))

    kappas = [kappa for kappa, _ in pairs]
    if len(set(kappas)) != len(kappas):
        raise ValueError(f"Coercivity trend needs distinct kappa values, got {kappas}")

    if not include_kappa32:
        pairs = [pair for pair in pairs if pair[0] != EXCLUDED_TREND_KAPPA]
    if len(pairs) < 2:
        raise ValueError("Coercivity trend needs at least 2 distinct kappa values")

    data = np.asarray(pairs, dtype=float)
    if np.any(data <= 0):
        raise ValueError("Coercivity trend needs positive kappa and rho_inv")
    return least_squares_slope(np.log(data[:, 0]), -np.log(data[:, 1]))
