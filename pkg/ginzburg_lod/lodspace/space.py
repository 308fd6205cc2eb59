"""
LOD Space Module

This module provides functionality to build localized orthogonal
decomposition spaces V_{h,l} = (1 - C_l) V_h: the corrected basis
psi_z = phi_z - C_l phi_z of every coarse vertex, expressed in fine P1
coefficients, plus Galerkin restriction of fine operators and an on-disk cache.

Only the basis for phi_z is stored; the basis function for i phi_z is i psi_z.
"""
import concurrent.futures
import json
import logging
import os
from dataclasses import dataclass
from typing import Any, Dict, Optional

import numpy as np
import scipy.sparse as sp

from ..assembly.fields import ComplexField, FormOperator, SpaceMap
from ..assembly.forms import p1_space_id
from ..assembly.potential import MagneticPotential
from ..assembly.quadrature import QuadratureRule, get_quadrature
from ..mesh.hierarchy import MeshHierarchy
from .correctors import CorrectorAssembler, ideal_correctors

logger = logging.getLogger(__name__)

CACHE_FORMAT_VERSION = 1


def lod_space_id(
    coarse_k: int, fine_k: int, kappa: float, beta: float, ell: Optional[int], potential: str = "trig"
) -> str:
    """Identifier of an LOD space; ell=None denotes the ideal (unlocalized) space."""
    layers = "inf" if ell is None else str(ell)
    return f"lod:c{coarse_k}:f{fine_k}:k{kappa:g}:b{beta:g}:l{layers}:{potential}"


@dataclass
class LodSpace:
    """
    Corrected coarse space represented on the fine mesh.

    Attributes:
        mh (MeshHierarchy): The hierarchy
        kappa (float): Ginzburg-Landau parameter
        beta (float): Stabilization shift of the corrector form
        ell (Optional[int]): Patch layers, None for the ideal space
        potential (str): Name of the magnetic potential
        quad_degree (int): Degree of the quadrature rule used
        basis (sp.csr_matrix): Complex matrix with columns psi_z (fine vertices x coarse vertices)
        corrector_norms (np.ndarray): Patch energy of the correctors per coarse element
    """

    mh: MeshHierarchy
    kappa: float
    beta: float
    ell: Optional[int]
    potential: str
    quad_degree: int
    basis: sp.csr_matrix
    corrector_norms: np.ndarray

    @property
    def space_id(self) -> str:
        return lod_space_id(self.mh.coarse_level, self.mh.fine_level, self.kappa, self.beta, self.ell, self.potential)

    @property
    def fine_space_id(self) -> str:
        return p1_space_id(self.mh.fine_level)

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    @property
    def space_map(self) -> SpaceMap:
        if getattr(self, "_space_map", None) is None:
            self._space_map = SpaceMap(self.space_id, self.fine_space_id, self.basis)
        return self._space_map

    def basis_field(self, vertex: int) -> ComplexField:
        """Fine representation of psi_z."""
        column = self.basis[:, vertex].toarray().ravel()
        return ComplexField.from_complex(self.fine_space_id, column)

    def expand(self, v: ComplexField) -> ComplexField:
        return self.space_map.expand(v)

    def metadata(self) -> Dict[str, Any]:
        return {
            "version": CACHE_FORMAT_VERSION,
            "coarse_k": self.mh.coarse_level,
            "fine_k": self.mh.fine_level,
            "kappa": self.kappa,
            "beta": self.beta,
            "ell": self.ell,
            "potential": self.potential,
            "quad_degree": self.quad_degree,
        }


def build_lod_space(
    mh: MeshHierarchy,
    potential: MagneticPotential,
    kappa: float,
    beta: float,
    ell: int,
    quad: Optional[QuadratureRule] = None,
    max_workers: Optional[int] = None,
) -> LodSpace:
    """
    Build V_{h,l} by solving one corrector problem per coarse element.

    Patch problems run in a thread pool; results are accumulated in element
    order, so the basis does not depend on scheduling.

    Args:
        mh (MeshHierarchy): The hierarchy
        potential (MagneticPotential): Magnetic potential A
        kappa (float): Ginzburg-Landau parameter
        beta (float): Stabilization shift
        ell (int): Patch layers, at least 1
        quad (QuadratureRule, optional): Quadrature rule (default degree 4)
        max_workers (int, optional): Size of the thread pool

    Returns:
        LodSpace: The space with basis psi_z = phi_z - sum_T C_{T,l} phi_z
    """
    if ell < 1:
        raise ValueError(f"Patch layers must be at least 1, got {ell}")

    assembler = CorrectorAssembler(mh, potential, kappa, beta, quad)
    # Shared fine data is built once before the workers read it.
    _ = assembler.fine_form, assembler.fine_local, assembler.coupling, assembler.prolongation, mh.fine_children

    num_elements = mh.coarse.num_elements
    logger.info(
        f"Building LOD space: {num_elements} corrector problems (kappa={kappa}, beta={beta}, ell={ell}, "
        f"coarse h=2^-{mh.coarse_level}, fine h=2^-{mh.fine_level})"
    )

    rows, cols, data = [], [], []
    norms = np.zeros(num_elements)
    with concurrent.futures.ThreadPoolExecutor(max_workers=max_workers) as executor:
        future_to_element = {
            executor.submit(assembler.local_correctors, element, ell): element for element in range(num_elements)
        }
        for future, element in future_to_element.items():
            try:
                result = future.result()
            except Exception as e:
                logger.error(f"Corrector problem of element {element} failed: {str(e)}")
                raise
            free = result.patch.fine_interior_vertices
            for local, vertex in enumerate(result.vertices):
                rows.append(free)
                cols.append(np.full(free.size, vertex))
                data.append(result.values[:, local])
            norms[element] = result.energy

    shape = (mh.fine.num_vertices, mh.coarse.num_vertices)
    correctors = sp.coo_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))), shape=shape
    ).tocsr()
    basis = (mh.prolongation.astype(complex) - correctors).tocsr()

    quad = quad or get_quadrature(4)
    space = LodSpace(mh, kappa, beta, ell, potential.name, quad.degree, basis, norms)
    logger.info(f"Built LOD space {space.space_id} with {basis.nnz} basis entries")
    return space


def build_ideal_lod_space(
    mh: MeshHierarchy,
    potential: MagneticPotential,
    kappa: float,
    beta: float,
    quad: Optional[QuadratureRule] = None,
) -> LodSpace:
    """Build V_h^LOD = (1 - C) V_h with the global (unlocalized) corrector."""
    quad = quad or get_quadrature(4)
    correctors = ideal_correctors(mh, potential, kappa, beta, quad)
    basis = (mh.prolongation.astype(complex) - correctors).tocsr()
    basis.eliminate_zeros()
    return LodSpace(mh, kappa, beta, None, potential.name, quad.degree, basis, np.zeros(mh.coarse.num_elements))


def coarse_operator(space: LodSpace, fine_op: FormOperator) -> FormOperator:
    """
    Restrict a fine operator to the corrected basis (Galerkin projection Psi^T X Psi in block form).

    Args:
        space (LodSpace): The LOD space
        fine_op (FormOperator): Operator on the fine P1 space

    Returns:
        FormOperator: Operator on the LOD coefficients

    Raises:
        SpaceMismatchError: If fine_op does not act on the fine space of `space`
    """
    return space.space_map.restrict_operator(fine_op)


def lod_cache_key(
    coarse_k: int, fine_k: int, kappa: float, beta: float, ell: int, quad_degree: int, potential: str = "trig"
) -> str:
    return f"lod_c{coarse_k}_f{fine_k}_k{kappa:g}_b{beta:g}_l{ell}_q{quad_degree}_{potential}.npz"


def save_lod_space(space: LodSpace, path: str):
    """
    Store an LOD space as a NumPy archive.

    Args:
        space (LodSpace): The space
        path (str): Target file
    """
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    basis = space.basis.tocsr()
    np.savez_compressed(
        path,
        data=basis.data,
        indices=basis.indices,
        indptr=basis.indptr,
        shape=np.array(basis.shape),
        corrector_norms=space.corrector_norms,
        metadata=np.array(json.dumps(space.metadata(), sort_keys=True)),
    )
    logger.info(f"Saved LOD space {space.space_id} to {path}")


def load_lod_space(path: str, mh: MeshHierarchy) -> LodSpace:
    """
    Load an LOD space stored by save_lod_space.

    Args:
        path (str): Archive path
        mh (MeshHierarchy): Hierarchy the space was built on

    Returns:
        LodSpace: The space

    Raises:
        ValueError: If the archive does not match the hierarchy or format version
    """
    with np.load(path, allow_pickle=False) as archive:
        metadata = json.loads(str(archive["metadata"]))
        if metadata.get("version") != CACHE_FORMAT_VERSION:
            raise ValueError(f"Unsupported LOD cache version {metadata.get('version')} in {path}")
        if (metadata["coarse_k"], metadata["fine_k"]) != (mh.coarse_level, mh.fine_level):
            raise ValueError(
                f"Cached LOD space {path} was built for levels ({metadata['coarse_k']}, {metadata['fine_k']}), "
                f"not ({mh.coarse_level}, {mh.fine_level})"
            )
        basis = sp.csr_matrix(
            (archive["data"], archive["indices"], archive["indptr"]), shape=tuple(archive["shape"])
        )
        norms = archive["corrector_norms"]

    logger.info(f"Loaded LOD space from {path}")
    return LodSpace(
        mh=mh,
        kappa=metadata["kappa"],
        beta=metadata["beta"],
        ell=metadata["ell"],
        potential=metadata["potential"],
        quad_degree=metadata["quad_degree"],
        basis=basis,
        corrector_norms=norms,
    )
