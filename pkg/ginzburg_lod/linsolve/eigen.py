"""
Generalized Eigensolver Module

This module provides functionality to compute the smallest eigenpairs of a
sparse symmetric pencil (H, G) with G symmetric positive definite, by block
inverse iteration with G-orthonormalization and a Rayleigh-Ritz step per sweep.

Inverse iteration runs around a shift that must not exceed the smallest
eigenvalue. Without an explicit shift a lower bound of the spectrum is taken
from the Gershgorin discs of H and an estimate of the smallest eigenvalue of G;
semidefinite H gives shift 0.
"""
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..utils.errors import SolverError
from .solvers import MatrixLike, as_matrix

logger = logging.getLogger(__name__)

SINGULAR_SHIFT = 1e-8
LOWER_BOUND_SAFETY = 2.0
G_ESTIMATE_SWEEPS = 50


@dataclass
class EigenResult:
    """
    Eigenpairs of a pencil.

    Attributes:
        values (np.ndarray): Eigenvalues in ascending order
        vectors (np.ndarray): G-orthonormal eigenvectors as columns
        residuals (np.ndarray): Dual-norm residuals ||H v - lambda G v||_{G^-1}
        converged (bool): Whether every residual reached the tolerance
        iterations (int): Number of sweeps performed
    """

    values: np.ndarray
    vectors: np.ndarray
    residuals: np.ndarray
    converged: bool
    iterations: int

    def __iter__(self):
        yield self.values
        yield self.vectors


def _factor_shifted(H: sp.csc_matrix, G: sp.csc_matrix, shift: float):
    try:
        return spla.splu((H - shift * G).tocsc()), shift
    except RuntimeError:
        fallback = shift - SINGULAR_SHIFT
        logger.warning(f"Shifted operator is singular at {shift}; retrying with shift {fallback}")
        try:
            return spla.splu((H - fallback * G).tocsc()), fallback
        except RuntimeError as e:
            raise SolverError(f"Cannot factor pencil operator near shift {shift}: {str(e)}", label="eigensolver") from e


def _spectrum_lower_bound(H: sp.csc_matrix, G: sp.csc_matrix, lu_g, rng: np.random.Generator) -> float:
    """Shift at or below every eigenvalue of the pencil (H, G)."""
    diagonal = H.diagonal()
    radii = np.asarray(abs(H).sum(axis=1)).ravel() - np.abs(diagonal)
    h_low = float(np.min(diagonal - radii))
    if h_low >= 0.0:
        return 0.0

    x = rng.standard_normal(G.shape[0])
    for _ in range(G_ESTIMATE_SWEEPS):
        x = lu_g.solve(x)
        x /= np.linalg.norm(x)
    g_low = float(x @ (G @ x))
    return LOWER_BOUND_SAFETY * h_low / g_low


def _g_orthonormal_basis(Y: np.ndarray, G: sp.spmatrix, cutoff: float = 1e-13) -> np.ndarray:
    gram = Y.T @ (G @ Y)
    gram = 0.5 * (gram + gram.T)
    evals, evecs = scipy.linalg.eigh(gram)
    keep = evals > cutoff * evals.max()
    return Y @ (evecs[:, keep] / np.sqrt(evals[keep]))


def eig_smallest(
    Hop: MatrixLike,
    Gop: MatrixLike,
    k: int = 6,
    tol: float = 1e-8,
    max_iter: int = 1000,
    shift: Optional[float] = None,
    seed: int = 0,
) -> EigenResult:
    """
    Compute the k algebraically smallest eigenpairs of H v = lambda G v.

    Args:
        Hop (MatrixLike): Symmetric operator H
        Gop (MatrixLike): Symmetric positive definite operator G
        k (int): Number of eigenpairs, at least 1
        tol (float): Bound on the dual-norm residual of each pair
        max_iter (int): Maximal number of sweeps
        shift (float, optional): Iteration shift, at most the smallest eigenvalue; a lower bound by default
        seed (int): Seed of the random starting block

    Returns:
        EigenResult: Eigenpairs; converged is False when max_iter was exhausted

    Raises:
        ValueError: If k is out of range or the shapes differ
        SolverError: If neither H nor a shifted H can be factored
    """
    H = as_matrix(Hop).tocsc()
    G = as_matrix(Gop).tocsc()
    n = H.shape[0]
    if H.shape != G.shape or H.shape[0] != H.shape[1]:
        raise ValueError(f"Pencil shapes differ or are not square: {H.shape} and {G.shape}")
    if k < 1 or k > n:
        raise ValueError(f"Number of eigenpairs must lie in [1, {n}], got {k}")

    lu_g = spla.splu(G)

    def dual_residuals(values: np.ndarray, vectors: np.ndarray) -> np.ndarray:
        R = H @ vectors - (G @ vectors) * values
        return np.sqrt(np.abs(np.einsum("ij,ij->j", R, lu_g.solve(R))))

    block = min(n, max(2 * k, k + 4))
    if block >= n:
        values, vectors = scipy.linalg.eigh(H.toarray(), G.toarray())
        values, vectors = values[:k], vectors[:, :k]
        residuals = dual_residuals(values, vectors)
        return EigenResult(values, vectors, residuals, bool(np.all(residuals <= tol)), 0)

    rng = np.random.default_rng(seed)
    if shift is None:
        shift = _spectrum_lower_bound(H, G, lu_g, rng)
        logger.debug(f"Eigensolver shift from spectrum lower bound: {shift:.6e}")
    lu, _ = _factor_shifted(H, G, shift)
    X = rng.standard_normal((n, block))

    values = np.zeros(k)
    vectors = X[:, :k]
    residuals = np.full(k, np.inf)
    iteration = 0
    for iteration in range(1, max_iter + 1):
        Y = lu.solve(G @ X)
        norms = np.sqrt(np.abs(np.einsum("ij,ij->j", Y, G @ Y)))
        Y = Y / np.where(norms > 0, norms, 1.0)

        Q = _g_orthonormal_basis(Y, G)
        Hs = Q.T @ (H @ Q)
        ritz_values, ritz_vectors = scipy.linalg.eigh(0.5 * (Hs + Hs.T))
        X = Q @ ritz_vectors

        if X.shape[1] < block:
            X = np.hstack([X, rng.standard_normal((n, block - X.shape[1]))])
        if ritz_values.size < k:
            continue

        values = ritz_values[:k]
        vectors = X[:, :k]
        residuals = dual_residuals(values, vectors)
        logger.debug(f"Inverse iteration sweep {iteration}: max residual {residuals.max():.3e}")
        if np.all(residuals <= tol):
            break

    converged = bool(np.all(residuals <= tol))
    if not converged:
        logger.warning(
            f"Eigensolver stopped after {iteration} sweeps with max residual {residuals.max():.3e} (tol {tol:.1e})"
        )
    return EigenResult(values, vectors, residuals, converged, iteration)


def rayleigh_quotient(Hop: MatrixLike, Gop: MatrixLike, vector: np.ndarray) -> float:
    H = as_matrix(Hop)
    G = as_matrix(Gop)
    return float(vector @ (H @ vector)) / float(vector @ (G @ vector))
