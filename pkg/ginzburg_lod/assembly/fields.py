"""
Fields Module

This module provides the data types shared by all discrete spaces: complex P1
fields stored as split real blocks, real block operators realizing
real-bilinear forms, and the complex-linear maps taking coefficients of an
active space (fine P1, coarse P1 or LOD) to fine P1 coefficients.

A complex coefficient vector v = p + i q is stored as the real vector [p; q].
A complex-linear form with Hermitian matrix H = S + iK acts through the real
block matrix [[S, -K], [K, S]], and b(v, w) = [w]^T M [v] = Re(w^H H v).
"""
import logging
from dataclasses import dataclass, field
from typing import Any, Dict

import numpy as np
import scipy.sparse as sp
from typing_extensions import Literal

from ..utils.errors import SpaceMismatchError

logger = logging.getLogger(__name__)

OperatorKind = Literal[
    "mass", "stiffness", "a_beta", "h1k_gram", "hessian", "coarse_fine_mass", "reaction", "restricted"
]

COMPLEX_LINEAR_KINDS = ("mass", "stiffness", "a_beta", "h1k_gram", "coarse_fine_mass")


@dataclass
class ComplexField:
    """
    Complex P1 function given by real and imaginary coefficient blocks.

    Attributes:
        space_id (str): Identifier of the owning discrete space
        re (np.ndarray): Real parts of the coefficients
        im (np.ndarray): Imaginary parts of the coefficients
    """

    space_id: str
    re: np.ndarray
    im: np.ndarray

    def __post_init__(self):
        self.re = np.asarray(self.re, dtype=float)
        self.im = np.asarray(self.im, dtype=float)
        if self.re.shape != self.im.shape or self.re.ndim != 1:
            raise ValueError(
                f"Real and imaginary blocks must be 1-D of equal length, got {self.re.shape} and {self.im.shape}"
            )

    @classmethod
    def from_complex(cls, space_id: str, values: np.ndarray) -> "ComplexField":
        values = np.asarray(values, dtype=complex)
        return cls(space_id, values.real.copy(), values.imag.copy())

    @classmethod
    def from_stacked(cls, space_id: str, stacked: np.ndarray) -> "ComplexField":
        stacked = np.asarray(stacked, dtype=float)
        if stacked.ndim != 1 or stacked.size % 2:
            raise ValueError(f"Stacked vector must have even length, got shape {stacked.shape}")
        n = stacked.size // 2
        return cls(space_id, stacked[:n].copy(), stacked[n:].copy())

    @classmethod
    def constant(cls, space_id: str, n: int, value: complex = 1.0) -> "ComplexField":
        return cls.from_complex(space_id, np.full(n, value, dtype=complex))

    @classmethod
    def zeros(cls, space_id: str, n: int) -> "ComplexField":
        return cls(space_id, np.zeros(n), np.zeros(n))

    def __len__(self) -> int:
        return self.re.size

    @property
    def values(self) -> np.ndarray:
        return self.re + 1j * self.im

    def stacked(self) -> np.ndarray:
        return np.concatenate([self.re, self.im])

    def modulus(self) -> np.ndarray:
        """Nodal modulus |u(z)| per vertex."""
        return np.hypot(self.re, self.im)

    def rotate(self, omega: float) -> "ComplexField":
        """Return e^{i omega} u."""
        return ComplexField.from_complex(self.space_id, np.exp(1j * omega) * self.values)

    def times_i(self) -> "ComplexField":
        return ComplexField(self.space_id, -self.im, self.re.copy())

    def scaled(self, factor: complex) -> "ComplexField":
        return ComplexField.from_complex(self.space_id, factor * self.values)

    def check_space(self, space_id: str):
        if self.space_id != space_id:
            raise SpaceMismatchError(f"Field lives in space '{self.space_id}', expected '{space_id}'")

    def __add__(self, other: "ComplexField") -> "ComplexField":
        other.check_space(self.space_id)
        return ComplexField(self.space_id, self.re + other.re, self.im + other.im)

    def __sub__(self, other: "ComplexField") -> "ComplexField":
        other.check_space(self.space_id)
        return ComplexField(self.space_id, self.re - other.re, self.im - other.im)


@dataclass
class FormOperator:
    """
    Sparse real block matrix realizing a real-bilinear form.

    Attributes:
        kind (str): Operator kind
        matrix (sp.csr_matrix): Full real block matrix acting on stacked [re; im] vectors
        space_id (str): Space of the trial (column) fields
        params (Dict[str, Any]): Parameters such as kappa and beta
    """

    kind: str
    matrix: sp.csr_matrix
    space_id: str = ""
    params: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.matrix = sp.csr_matrix(self.matrix)
        rows, cols = self.matrix.shape
        if rows % 2 or cols % 2:
            raise ValueError(f"Block operator must have even dimensions, got {self.matrix.shape}")

    @classmethod
    def from_blocks(
        cls,
        kind: str,
        S: sp.spmatrix,
        K: sp.spmatrix = None,
        space_id: str = "",
        params: Dict[str, Any] = None,
    ) -> "FormOperator":
        """
        Build the block matrix [[S, -K], [K, S]] of a complex-linear form.

        Args:
            kind (str): Operator kind
            S (sp.spmatrix): Real part of the Hermitian matrix
            K (sp.spmatrix, optional): Imaginary part, zero if omitted
            space_id (str): Trial space identifier
            params (Dict[str, Any], optional): Form parameters

        Returns:
            FormOperator: The operator
        """
        S = sp.csr_matrix(S)
        K = sp.csr_matrix(S.shape) if K is None else sp.csr_matrix(K)
        matrix = sp.bmat([[S, -K], [K, S]], format="csr")
        return cls(kind, matrix, space_id, dict(params or {}))

    @classmethod
    def from_hermitian(cls, kind: str, H: sp.spmatrix, space_id: str = "", params: Dict[str, Any] = None):
        H = sp.csr_matrix(H)
        return cls.from_blocks(kind, H.real, H.imag, space_id, params)

    @property
    def shape(self):
        """Complex dimensions (rows, columns)."""
        rows, cols = self.matrix.shape
        return rows // 2, cols // 2

    @property
    def is_complex_linear(self) -> bool:
        return self.kind in COMPLEX_LINEAR_KINDS

    @property
    def S(self) -> sp.csr_matrix:
        m, n = self.shape
        return self.matrix[:m, :n].tocsr()

    @property
    def K(self) -> sp.csr_matrix:
        m, n = self.shape
        return self.matrix[m:, :n].tocsr()

    def hermitian(self) -> sp.csr_matrix:
        """Complex matrix S + iK; only meaningful for complex-linear kinds."""
        if not self.is_complex_linear:
            raise ValueError(f"Operator of kind '{self.kind}' is not complex-linear")
        return (self.S + 1j * self.K).tocsr()

    def apply(self, v: ComplexField) -> np.ndarray:
        """Stacked vector M [v]."""
        if self.space_id:
            v.check_space(self.space_id)
        if len(v) != self.shape[1]:
            raise SpaceMismatchError(f"Field of length {len(v)} does not match operator with {self.shape[1]} columns")
        return self.matrix @ v.stacked()

    def form(self, v: ComplexField, w: ComplexField) -> float:
        """b(v, w) = [w]^T M [v]."""
        return float(w.stacked() @ self.apply(v))

    def quadratic(self, v: ComplexField) -> float:
        return self.form(v, v)

    def __add__(self, other: "FormOperator") -> "FormOperator":
        if self.matrix.shape != other.matrix.shape:
            raise SpaceMismatchError(f"Cannot add operators of shapes {self.matrix.shape} and {other.matrix.shape}")
        kind = self.kind if self.kind == other.kind else "hessian"
        return FormOperator(kind, self.matrix + other.matrix, self.space_id, dict(self.params))


class SpaceMap:
    """
    Complex-linear map from coefficients of an active space to fine P1 coefficients.

    Attributes:
        space_id (str): Identifier of the active space
        fine_space_id (str): Identifier of the fine P1 space
        basis (sp.csr_matrix): Complex matrix Psi of shape (fine dofs, active dofs)
    """

    def __init__(self, space_id: str, fine_space_id: str, basis: sp.spmatrix):
        self.space_id = space_id
        self.fine_space_id = fine_space_id
        self.basis = sp.csr_matrix(basis, dtype=complex)
        self._block = None

    def __repr__(self) -> str:
        return f"SpaceMap('{self.space_id}' -> '{self.fine_space_id}', shape={self.basis.shape})"

    @classmethod
    def identity(cls, space_id: str, n: int) -> "SpaceMap":
        return cls(space_id, space_id, sp.identity(n, dtype=complex, format="csr"))

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    @property
    def fine_dim(self) -> int:
        return self.basis.shape[0]

    def block(self) -> sp.csr_matrix:
        """Real form [[Re Psi, -Im Psi], [Im Psi, Re Psi]]."""
        if self._block is None:
            re, im = self.basis.real, self.basis.imag
            self._block = sp.bmat([[re, -im], [im, re]], format="csr")
        return self._block

    def expand(self, v: ComplexField) -> ComplexField:
        v.check_space(self.space_id)
        return ComplexField.from_complex(self.fine_space_id, self.basis @ v.values)

    def restrict(self, load: np.ndarray) -> np.ndarray:
        """Apply Psi^H to a stacked fine load vector, returning a stacked active-space vector."""
        return self.block().T @ load

    def restrict_operator(self, op: FormOperator) -> FormOperator:
        """Galerkin restriction Psi_b^T M Psi_b of a fine operator."""
        if op.matrix.shape != (2 * self.fine_dim, 2 * self.fine_dim):
            raise SpaceMismatchError(
                f"Operator of shape {op.matrix.shape} does not act on the fine space of dimension {self.fine_dim}"
            )
        block = self.block()
        restricted = (block.T @ op.matrix @ block).tocsr()
        return FormOperator(op.kind, restricted, self.space_id, dict(op.params))
