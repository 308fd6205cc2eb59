"""
Mesh Hierarchy Module

This module builds nested structured triangulations of the unit square and
provides element/vertex connectivity, point location and the l-layer patch
neighborhoods used by the corrector problems.

Vertices and cells are numbered lexicographically by (y, x). Every square cell
is split by the diagonal from its lower-left to its upper-right corner into a
"lower" and an "upper" triangle, so uniform refinement of level k yields level
k + 1 and every fine triangle lies in exactly one coarse triangle.
"""
import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, List, Tuple

import numpy as np
import scipy.sparse as sp

logger = logging.getLogger(__name__)

MAX_LEVEL = 12


class TriMesh:
    """
    Structured triangulation of [0, 1]^2 with 2^k cells per side.

    Attributes:
        level (int): Level exponent k
        vertices (np.ndarray): Vertex coordinates, shape ((2^k+1)^2, 2)
        triangles (np.ndarray): Counterclockwise vertex triples, shape (2*4^k, 3)
    """

    def __init__(self, level: int):
        if level < 0 or level > MAX_LEVEL:
            raise ValueError(f"Mesh level must lie in [0, {MAX_LEVEL}], got {level}")

        self.level = level
        n = 2 ** level
        self.cells_per_side = n

        coords = np.arange(n + 1, dtype=float) / n
        xx, yy = np.meshgrid(coords, coords)
        self.vertices = np.column_stack([xx.ravel(), yy.ravel()])

        ii, jj = np.meshgrid(np.arange(n), np.arange(n))
        v00 = (jj * (n + 1) + ii).ravel()
        v10 = v00 + 1
        v01 = v00 + n + 1
        v11 = v01 + 1

        triangles = np.empty((2 * n * n, 3), dtype=np.int64)
        triangles[0::2] = np.column_stack([v00, v10, v11])
        triangles[1::2] = np.column_stack([v00, v11, v01])
        self.triangles = triangles

    def __repr__(self) -> str:
        return f"TriMesh(level={self.level}, vertices={self.num_vertices}, triangles={self.num_elements})"

    @property
    def num_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def num_elements(self) -> int:
        return self.triangles.shape[0]

    @property
    def h(self) -> float:
        """Axis-aligned edge length 2^-k, the mesh size used in all reports."""
        return 1.0 / self.cells_per_side

    @property
    def diameter(self) -> float:
        return np.sqrt(2.0) / self.cells_per_side

    @cached_property
    def incidence(self) -> sp.csr_matrix:
        """Element-to-vertex incidence matrix (elements x vertices) with unit entries."""
        rows = np.repeat(np.arange(self.num_elements), 3)
        data = np.ones(rows.size)
        return sp.csr_matrix(
            (data, (rows, self.triangles.ravel())),
            shape=(self.num_elements, self.num_vertices),
        )

    @cached_property
    def element_adjacency(self) -> sp.csr_matrix:
        """Boolean element adjacency by vertex sharing (self-adjacency included)."""
        adjacency = (self.incidence @ self.incidence.T).tocsr()
        adjacency.data[:] = 1.0
        return adjacency

    @cached_property
    def vertex_neighbors(self) -> sp.csr_matrix:
        """Boolean vertex adjacency along mesh edges."""
        t = self.triangles
        rows = np.concatenate([t[:, 0], t[:, 1], t[:, 2], t[:, 1], t[:, 2], t[:, 0]])
        cols = np.concatenate([t[:, 1], t[:, 2], t[:, 0], t[:, 0], t[:, 1], t[:, 2]])
        graph = sp.csr_matrix(
            (np.ones(rows.size), (rows, cols)),
            shape=(self.num_vertices, self.num_vertices),
        )
        graph.data[:] = 1.0
        return graph

    @cached_property
    def areas(self) -> np.ndarray:
        return 0.5 * self._jacobian_determinants

    @cached_property
    def _jacobian_determinants(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]

    @cached_property
    def gradients(self) -> np.ndarray:
        """Gradients of the three barycentric coordinates per element, shape (M, 3, 2)."""
        p = self.vertices[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        det = self._jacobian_determinants

        grads = np.empty((self.num_elements, 3, 2))
        grads[:, 1, 0] = e2[:, 1] / det
        grads[:, 1, 1] = -e2[:, 0] / det
        grads[:, 2, 0] = -e1[:, 1] / det
        grads[:, 2, 1] = e1[:, 0] / det
        grads[:, 0] = -(grads[:, 1] + grads[:, 2])
        return grads

    @cached_property
    def boundary_vertices(self) -> np.ndarray:
        x, y = self.vertices[:, 0], self.vertices[:, 1]
        on_boundary = (x == 0.0) | (x == 1.0) | (y == 0.0) | (y == 1.0)
        return np.flatnonzero(on_boundary)

    def locate(self, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """
        Locate points in the triangulation.

        Args:
            points (np.ndarray): Coordinates in [0, 1]^2, shape (P, 2)

        Returns:
            Tuple[np.ndarray, np.ndarray]: Containing element per point and the
            barycentric coordinates of the point in that element, shape (P, 3)

        Raises:
            ValueError: If a point lies outside the unit square
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if np.any(points < 0.0) or np.any(points > 1.0):
            raise ValueError("Points must lie in the unit square")

        n = self.cells_per_side
        scaled = points * n
        cell = np.minimum(np.floor(scaled).astype(np.int64), n - 1)
        local = scaled - cell
        upper = local[:, 1] > local[:, 0]
        elements = 2 * (cell[:, 1] * n + cell[:, 0]) + upper.astype(np.int64)

        origin = self.vertices[self.triangles[elements, 0]]
        grads = self.gradients[elements]
        offset = points - origin
        bary = np.empty((points.shape[0], 3))
        bary[:, 1] = np.einsum("pd,pd->p", grads[:, 1], offset)
        bary[:, 2] = np.einsum("pd,pd->p", grads[:, 2], offset)
        bary[:, 0] = 1.0 - bary[:, 1] - bary[:, 2]
        return elements, bary

    def centroids(self) -> np.ndarray:
        return self.vertices[self.triangles].mean(axis=1)


def interpolation_matrix(mesh: TriMesh, points: np.ndarray, drop_tol: float = 1e-14) -> sp.csr_matrix:
    """
    Build the matrix evaluating P1 functions of `mesh` at `points`.

    Args:
        mesh (TriMesh): Mesh carrying the P1 space
        points (np.ndarray): Evaluation points, shape (P, 2)
        drop_tol (float): Barycentric weights below this magnitude are dropped

    Returns:
        sp.csr_matrix: Matrix of shape (P, num_vertices)
    """
    elements, bary = mesh.locate(points)
    rows = np.repeat(np.arange(bary.shape[0]), 3)
    cols = mesh.triangles[elements].ravel()
    data = bary.ravel()
    keep = np.abs(data) > drop_tol
    return sp.csr_matrix(
        (data[keep], (rows[keep], cols[keep])),
        shape=(bary.shape[0], mesh.num_vertices),
    )


class MeshHierarchy:
    """
    Nested structured meshes from a coarse to a fine level.

    Attributes:
        levels (List[TriMesh]): Meshes ordered coarse to fine
        coarse_level (int): Exponent of the coarse mesh
        fine_level (int): Exponent of the fine mesh
    """

    def __init__(self, coarse_level: int, fine_level: int):
        self.coarse_level = coarse_level
        self.fine_level = fine_level
        self.levels: List[TriMesh] = [TriMesh(k) for k in range(coarse_level, fine_level + 1)]
        self._parents: Dict[Tuple[int, int], np.ndarray] = {}

    def __repr__(self) -> str:
        return f"MeshHierarchy(coarse_level={self.coarse_level}, fine_level={self.fine_level})"

    @property
    def coarse(self) -> TriMesh:
        return self.levels[0]

    @property
    def fine(self) -> TriMesh:
        return self.levels[-1]

    def mesh(self, level: int) -> TriMesh:
        return self.levels[level - self.coarse_level]

    def parent_of(self, level: int = None, from_level: int = None) -> np.ndarray:
        """
        Map elements of `from_level` (default fine) to their ancestor at `level` (default coarse).

        Args:
            level (int, optional): Ancestor level
            from_level (int, optional): Descendant level

        Returns:
            np.ndarray: Ancestor element id per descendant element
        """
        level = self.coarse_level if level is None else level
        from_level = self.fine_level if from_level is None else from_level
        if level > from_level:
            raise ValueError(f"Ancestor level {level} is finer than {from_level}")

        key = (level, from_level)
        if key not in self._parents:
            elements, _ = self.mesh(level).locate(self.mesh(from_level).centroids())
            self._parents[key] = elements
        return self._parents[key]

    @cached_property
    def fine_children(self) -> List[np.ndarray]:
        """Fine element ids per coarse element."""
        parents = self.parent_of()
        order = np.argsort(parents, kind="stable")
        counts = np.bincount(parents, minlength=self.coarse.num_elements)
        return np.split(order, np.cumsum(counts)[:-1])

    @cached_property
    def prolongation(self) -> sp.csr_matrix:
        """Nodal interpolation of coarse P1 functions onto the fine vertices."""
        return interpolation_matrix(self.coarse, self.fine.vertices)


@dataclass(frozen=True)
class Patch:
    """
    The l-layer neighborhood N^l(T) of a coarse element with its fine-scale index sets.

    Attributes:
        center_element (int): Coarse element T
        ell (int): Number of layers
        coarse_elements (np.ndarray): Coarse element ids in N^l(T)
        fine_elements (np.ndarray): Fine element ids inside the patch
        fine_interior_vertices (np.ndarray): Fine vertices whose incident elements all lie in the patch
        coarse_vertices_active (np.ndarray): Coarse vertices of the patch elements
    """

    center_element: int
    ell: int
    coarse_elements: np.ndarray
    fine_elements: np.ndarray
    fine_interior_vertices: np.ndarray
    coarse_vertices_active: np.ndarray


def build_hierarchy(coarse_k: int, fine_k: int) -> MeshHierarchy:
    """
    Build the nested hierarchy between two level exponents.

    Args:
        coarse_k (int): Coarse level exponent, h = 2^-coarse_k
        fine_k (int): Fine level exponent, h_fine = 2^-fine_k

    Returns:
        MeshHierarchy: The hierarchy

    Raises:
        ValueError: If not 0 <= coarse_k < fine_k <= 12
    """
    if coarse_k >= fine_k:
        raise ValueError(f"Coarse level {coarse_k} must be strictly coarser than fine level {fine_k}")
    if coarse_k < 0 or fine_k > MAX_LEVEL:
        raise ValueError(f"Levels must satisfy 0 <= coarse_k < fine_k <= {MAX_LEVEL}")

    hierarchy = MeshHierarchy(coarse_k, fine_k)
    logger.info(
        f"Built mesh hierarchy: coarse h=2^-{coarse_k} ({hierarchy.coarse.num_elements} triangles), "
        f"fine h=2^-{fine_k} ({hierarchy.fine.num_elements} triangles)"
    )
    return hierarchy


def neighborhood(mesh: TriMesh, elements: np.ndarray) -> np.ndarray:
    """
    One closure step N(G): all elements sharing at least a vertex with G.

    Args:
        mesh (TriMesh): The mesh
        elements (np.ndarray): Element ids of G

    Returns:
        np.ndarray: Sorted element ids of N(G)
    """
    indicator = np.zeros(mesh.num_elements)
    indicator[np.asarray(elements, dtype=np.int64)] = 1.0
    touched = mesh.element_adjacency @ indicator
    return np.flatnonzero(touched > 0)


def layer_distances(mesh: TriMesh, element: int) -> np.ndarray:
    """
    Breadth-first layer index of every element relative to `element`.

    Returns:
        np.ndarray: Smallest l with S in N^l(T) for every element S (N^0(T) = T)
    """
    if element < 0 or element >= mesh.num_elements:
        raise ValueError(f"Element {element} out of range for {mesh}")

    distances = np.full(mesh.num_elements, -1, dtype=np.int64)
    distances[element] = 0
    frontier = np.array([element])
    layer = 0
    while frontier.size:
        layer += 1
        reached = neighborhood(mesh, frontier)
        frontier = reached[distances[reached] < 0]
        distances[frontier] = layer
    return distances


def layer_distance(mesh: TriMesh, element: int, other: int) -> int:
    """Smallest l >= 0 with `other` contained in N^l(`element`)."""
    return int(layer_distances(mesh, element)[other])


def patch(mesh_h: MeshHierarchy, element: int, ell: int) -> Patch:
    """
    Extract the l-layer patch around a coarse element.

    Args:
        mesh_h (MeshHierarchy): The hierarchy
        element (int): Coarse element id T
        ell (int): Number of layers, at least 1

    Returns:
        Patch: Patch with coarse/fine element sets and free fine vertices
    """
    if ell < 1:
        raise ValueError(f"Patch layers must be at least 1, got {ell}")

    coarse = mesh_h.coarse
    fine = mesh_h.fine
    distances = layer_distances(coarse, element)
    coarse_mask = (distances >= 0) & (distances <= ell)
    coarse_elements = np.flatnonzero(coarse_mask)

    fine_mask = coarse_mask[mesh_h.parent_of()]
    fine_elements = np.flatnonzero(fine_mask)

    inside = fine.incidence.T @ fine_mask.astype(float)
    total = fine.incidence.T @ np.ones(fine.num_elements)
    fine_interior = np.flatnonzero((inside == total) & (total > 0))

    active = np.unique(coarse.triangles[coarse_elements])

    logger.debug(
        f"Patch of element {element} with ell={ell}: {coarse_elements.size} coarse elements, "
        f"{fine_interior.size} free fine vertices"
    )
    return Patch(
        center_element=int(element),
        ell=int(ell),
        coarse_elements=coarse_elements,
        fine_elements=fine_elements,
        fine_interior_vertices=fine_interior,
        coarse_vertices_active=active,
    )
