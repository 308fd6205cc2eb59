import numpy as np
import pytest

from ginzburg_lod.mesh.hierarchy import (
    TriMesh,
    build_hierarchy,
    interpolation_matrix,
    layer_distance,
    layer_distances,
    neighborhood,
    patch,
)


def test_mesh_sizes():
    mesh = TriMesh(2)
    assert mesh.num_vertices == 25
    assert mesh.num_elements == 32
    assert mesh.h == pytest.approx(0.25)
    np.testing.assert_allclose(mesh.areas, 1.0 / 32.0)
    assert mesh.areas.sum() == pytest.approx(1.0)


def test_invalid_level():
    with pytest.raises(ValueError):
        TriMesh(-1)
    with pytest.raises(ValueError):
        TriMesh(13)


def test_gradients_reproduce_linear_functions():
    mesh = TriMesh(3)
    x = mesh.vertices[:, 0]
    y = mesh.vertices[:, 1]
    grad_x = np.einsum("mr,mrd->md", x[mesh.triangles], mesh.gradients)
    grad_y = np.einsum("mr,mrd->md", y[mesh.triangles], mesh.gradients)
    np.testing.assert_allclose(grad_x, np.tile([1.0, 0.0], (mesh.num_elements, 1)), atol=1e-12)
    np.testing.assert_allclose(grad_y, np.tile([0.0, 1.0], (mesh.num_elements, 1)), atol=1e-12)
    np.testing.assert_allclose(mesh.gradients.sum(axis=1), 0.0, atol=1e-12)


def test_boundary_vertices():
    mesh = TriMesh(2)
    assert mesh.boundary_vertices.size == 16
    corners = {0, 4, 20, 24}
    assert corners <= set(mesh.boundary_vertices.tolist())


def test_locate_and_interpolate_linear(rng):
    mesh = TriMesh(3)
    points = rng.uniform(0.0, 1.0, size=(200, 2))
    elements, bary = mesh.locate(points)
    assert np.all(bary >= -1e-12)
    np.testing.assert_allclose(bary.sum(axis=1), 1.0)

    values = mesh.vertices[:, 0] + 2.0 * mesh.vertices[:, 1] - 0.5
    evaluation = interpolation_matrix(mesh, points)
    np.testing.assert_allclose(evaluation @ values, points[:, 0] + 2.0 * points[:, 1] - 0.5, atol=1e-12)


def test_locate_boundary_points():
    mesh = TriMesh(2)
    elements, bary = mesh.locate(np.array([[1.0, 1.0], [0.0, 0.0], [1.0, 0.0]]))
    assert np.all(elements < mesh.num_elements)
    np.testing.assert_allclose(np.sort(bary, axis=1)[:, -1], 1.0, atol=1e-14)


def test_locate_outside_raises():
    with pytest.raises(ValueError):
        TriMesh(2).locate(np.array([[1.5, 0.5]]))


def test_build_hierarchy_validates_levels():
    with pytest.raises(ValueError):
        build_hierarchy(3, 3)
    with pytest.raises(ValueError):
        build_hierarchy(-1, 2)
    with pytest.raises(ValueError):
        build_hierarchy(2, 13)


def test_fine_children_partition(small_hierarchy):
    children = small_hierarchy.fine_children
    assert len(children) == small_hierarchy.coarse.num_elements
    assert all(child.size == 16 for child in children)
    assert np.array_equal(np.sort(np.concatenate(children)), np.arange(small_hierarchy.fine.num_elements))


def test_children_lie_inside_parent(small_hierarchy):
    coarse = small_hierarchy.coarse
    fine = small_hierarchy.fine
    for element, children in enumerate(small_hierarchy.fine_children):
        located, _ = coarse.locate(fine.centroids()[children])
        assert np.all(located == element)


def test_prolongation_partition_of_unity(small_hierarchy):
    P = small_hierarchy.prolongation
    np.testing.assert_allclose(np.asarray(P.sum(axis=1)).ravel(), 1.0, atol=1e-14)
    coarse_linear = small_hierarchy.coarse.vertices @ np.array([0.3, -1.2])
    fine_linear = small_hierarchy.fine.vertices @ np.array([0.3, -1.2])
    np.testing.assert_allclose(P @ coarse_linear, fine_linear, atol=1e-13)


def test_parent_of_intermediate_level():
    mh = build_hierarchy(1, 3)
    parents = mh.parent_of(level=2, from_level=3)
    assert parents.shape == (mh.fine.num_elements,)
    assert np.all(np.bincount(parents) == 4)
    with pytest.raises(ValueError):
        mh.parent_of(level=3, from_level=2)


def test_neighborhood_and_layers():
    mesh = TriMesh(2)
    center = 10
    first = neighborhood(mesh, np.array([center]))
    assert center in first
    distances = layer_distances(mesh, center)
    assert distances[center] == 0
    assert np.array_equal(np.flatnonzero(distances <= 1), first)
    assert np.all(distances >= 0)
    assert layer_distance(mesh, center, 31) == layer_distance(mesh, 31, center)


def test_layer_distances_invalid_element():
    with pytest.raises(ValueError):
        layer_distances(TriMesh(1), 8)


def test_patch_saturates_domain(small_hierarchy):
    full = patch(small_hierarchy, 0, 5)
    assert full.coarse_elements.size == small_hierarchy.coarse.num_elements
    assert full.fine_interior_vertices.size == small_hierarchy.fine.num_vertices
    assert full.coarse_vertices_active.size == small_hierarchy.coarse.num_vertices


def test_patch_interior_vertices(medium_hierarchy):
    area = patch(medium_hierarchy, 0, 1)
    fine = medium_hierarchy.fine
    inside = np.zeros(fine.num_elements, dtype=bool)
    inside[area.fine_elements] = True
    incidence = fine.incidence.tocsc()
    for vertex in range(fine.num_vertices):
        incident = incidence[:, vertex].nonzero()[0]
        assert (vertex in area.fine_interior_vertices) == bool(np.all(inside[incident]))
    assert np.array_equal(area.coarse_vertices_active, np.unique(medium_hierarchy.coarse.triangles[area.coarse_elements]))


def test_patch_requires_a_layer(small_hierarchy):
    with pytest.raises(ValueError):
        patch(small_hierarchy, 0, 0)


def test_patch_sizes_on_eight_by_eight_mesh():
    mh = build_hierarchy(3, 4)
    interior, _ = mh.coarse.locate(np.array([[0.45, 0.42]]))
    assert patch(mh, int(interior[0]), 1).coarse_elements.size == 13
    assert patch(mh, 0, 1).coarse_elements.size < 13
    assert patch(mh, int(interior[0]), 2).coarse_elements.size > 13
    assert patch(mh, int(interior[0]), 16).coarse_elements.size == mh.coarse.num_elements == 128
