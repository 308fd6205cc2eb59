"""
Linear Solvers Module

This module provides functionality to solve the symmetric positive definite
systems (mass, Gram, restricted operators) and the symmetric indefinite
saddle point systems of the corrector problems.
"""
import logging
from dataclasses import dataclass
from typing import Callable, Tuple, Union

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from typing_extensions import Literal

from ..assembly.fields import FormOperator
from ..utils.errors import SolverError

logger = logging.getLogger(__name__)

SolveMethod = Literal["direct", "cg"]
MatrixLike = Union[FormOperator, sp.spmatrix, np.ndarray]

SPD_RESIDUAL_TOL = 1e-10
CONSTRAINT_RESIDUAL_TOL = 1e-10
STATIONARITY_RESIDUAL_TOL = 1e-9


def as_matrix(op: MatrixLike) -> sp.csr_matrix:
    if isinstance(op, FormOperator):
        return op.matrix
    return sp.csr_matrix(op)


def _relative_residual(matrix: sp.spmatrix, x: np.ndarray, rhs: np.ndarray) -> float:
    scale = np.linalg.norm(rhs)
    residual = np.linalg.norm(matrix @ x - rhs)
    if scale == 0.0:
        return residual
    return residual / scale


def spd_solver(
    op: MatrixLike,
    method: SolveMethod = "direct",
    tol: float = SPD_RESIDUAL_TOL,
    label: str = "",
) -> Callable[[np.ndarray], np.ndarray]:
    """
    Prepare a reusable solver for a symmetric positive definite operator.

    The direct method factorizes once with sparse LU; the cg method runs
    Jacobi-preconditioned conjugate gradients per call. Every solve checks the
    relative residual against `tol`.

    Args:
        op (MatrixLike): SPD operator or matrix
        method (SolveMethod): "direct" or "cg"
        tol (float): Relative residual bound
        label (str): Name used in error messages

    Returns:
        Callable[[np.ndarray], np.ndarray]: Function mapping a right-hand side to the solution

    Raises:
        SolverError: If the factorization breaks down
    """
    matrix = as_matrix(op)
    label = label or (op.kind if isinstance(op, FormOperator) else "spd system")

    if method == "direct":
        try:
            lu = spla.splu(matrix.tocsc())
        except RuntimeError as e:
            logger.error(f"Factorization of {label} failed: {str(e)}")
            raise SolverError(f"Factorization of {label} failed: {str(e)}", label=label) from e

        def _solve(rhs: np.ndarray) -> np.ndarray:
            x = lu.solve(np.asarray(rhs, dtype=float))
            residual = _relative_residual(matrix, x, rhs)
            if not residual <= tol:
                raise SolverError(f"Direct solve of {label} reached residual {residual:.3e}", label=label, residual=residual)
            return x

        return _solve

    if method == "cg":
        diagonal = matrix.diagonal()
        if np.any(diagonal <= 0):
            raise SolverError(f"Operator {label} has non-positive diagonal entries", label=label)
        preconditioner = spla.LinearOperator(matrix.shape, matvec=lambda r: r / diagonal)

        def _solve(rhs: np.ndarray) -> np.ndarray:
            rhs = np.asarray(rhs, dtype=float)
            x, info = spla.cg(matrix, rhs, rtol=0.1 * tol, atol=0.0, M=preconditioner, maxiter=10 * matrix.shape[0])
            residual = _relative_residual(matrix, x, rhs)
            if info != 0 or not residual <= tol:
                raise SolverError(
                    f"CG on {label} did not converge (info={info}, residual {residual:.3e})",
                    label=label,
                    residual=residual,
                )
            return x

        return _solve

    raise ValueError(f"Unknown solve method '{method}'")


def solve_spd(op: MatrixLike, rhs: np.ndarray, method: SolveMethod = "direct", tol: float = SPD_RESIDUAL_TOL) -> np.ndarray:
    """
    Solve op x = rhs for a symmetric positive definite operator.

    Args:
        op (MatrixLike): SPD operator
        rhs (np.ndarray): Right-hand side
        method (SolveMethod): "direct" or "cg"
        tol (float): Relative residual bound

    Returns:
        np.ndarray: Solution vector
    """
    return spd_solver(op, method=method, tol=tol)(rhs)


@dataclass
class SaddleSystem:
    """
    Saddle point system [[A, C^T], [C, 0]] [x; lambda] = [rhs; 0].

    Attributes:
        A (sp.spmatrix): Symmetric primal block
        C (sp.spmatrix): Constraint matrix of full row rank
        rhs (np.ndarray): Load vectors, shape (n,) or (n, k)
        label (str): Name of the system used in error messages
    """

    A: sp.spmatrix
    C: sp.spmatrix
    rhs: np.ndarray
    label: str = "saddle system"


def drop_redundant_constraints(C: sp.spmatrix, tol: float = 1e-14) -> Tuple[sp.csr_matrix, np.ndarray]:
    """
    Remove constraint rows that vanish on the free degrees of freedom.

    Args:
        C (sp.spmatrix): Constraint matrix
        tol (float): Rows whose largest entry is below tol times the largest entry of C are dropped

    Returns:
        Tuple[sp.csr_matrix, np.ndarray]: Containing the reduced matrix and the kept row ids
    """
    C = sp.csr_matrix(C)
    if C.nnz == 0:
        return C[:0], np.array([], dtype=np.int64)
    row_max = np.asarray(abs(C).max(axis=1).todense()).ravel()
    kept = np.flatnonzero(row_max > tol * row_max.max())
    return C[kept], kept


def solve_saddle(system: SaddleSystem) -> np.ndarray:
    """
    Solve a saddle point system by one sparse LU factorization of the KKT matrix.

    Args:
        system (SaddleSystem): The system

    Returns:
        np.ndarray: Primal solutions with the shape of system.rhs

    Raises:
        SolverError: If the KKT matrix is singular or a residual bound fails
    """
    A = sp.csr_matrix(system.A)
    C = sp.csr_matrix(system.C)
    n, m = A.shape[0], C.shape[0]
    rhs = np.asarray(system.rhs, dtype=float)
    loads = rhs.reshape(n, -1)

    if not np.any(loads):
        return np.zeros_like(rhs)

    kkt = sp.bmat([[A, C.T], [C, None]], format="csc") if m else A.tocsc()
    try:
        lu = spla.splu(kkt)
    except RuntimeError as e:
        rank = np.linalg.matrix_rank(C.toarray()) if m else 0
        message = f"Singular saddle system {system.label}: constraint rank {rank} of {m} rows ({str(e)})"
        logger.error(message)
        raise SolverError(message, label=system.label) from e

    full_rhs = np.vstack([loads, np.zeros((m, loads.shape[1]))])
    solution = lu.solve(full_rhs)
    primal, multipliers = solution[:n], solution[n:]

    for column in range(loads.shape[1]):
        x, lam, b = primal[:, column], multipliers[:, column], loads[:, column]
        constraint = 0.0
        if m:
            scale = max(np.linalg.norm(x, np.inf) * abs(C).max(), np.finfo(float).tiny)
            constraint = np.linalg.norm(C @ x, np.inf) / scale
        stationarity = np.linalg.norm(A @ x + C.T @ lam - b) / max(np.linalg.norm(b), np.finfo(float).tiny)
        if constraint > CONSTRAINT_RESIDUAL_TOL or stationarity > STATIONARITY_RESIDUAL_TOL:
            message = (
                f"Saddle system {system.label} residuals out of bounds "
                f"(constraint {constraint:.3e}, stationarity {stationarity:.3e})"
            )
            logger.error(message)
            raise SolverError(message, label=system.label, residual=max(constraint, stationarity))

    return primal.reshape(rhs.shape)
