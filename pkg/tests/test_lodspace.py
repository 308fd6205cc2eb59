import numpy as np
import pytest
import scipy.linalg

from ginzburg_lod.analysis.errors import best_approximation_error
from ginzburg_lod.assembly.fields import ComplexField
from ginzburg_lod.assembly.forms import assemble_abeta, assemble_h1k_gram, assemble_mass
from ginzburg_lod.assembly.transfer import assemble_coarse_fine_mass
from ginzburg_lod.lodspace.correctors import (
    CorrectorAssembler,
    corrector_decay_profile,
    element_corrector,
    ideal_correctors,
)
from ginzburg_lod.lodspace.space import (
    build_ideal_lod_space,
    build_lod_space,
    coarse_operator,
    load_lod_space,
    lod_cache_key,
    lod_space_id,
    save_lod_space,
)
from ginzburg_lod.mesh.hierarchy import build_hierarchy
from ginzburg_lod.utils.errors import SpaceMismatchError

KAPPA = 4.0
BETA = 1.0


def test_space_identifiers():
    assert lod_space_id(3, 7, 8.0, 0.0, 4) == "lod:c3:f7:k8:b0:l4:trig"
    assert lod_space_id(2, 5, 12.5, 1.0, None, "zero") == "lod:c2:f5:k12.5:b1:linf:zero"
    assert lod_cache_key(3, 7, 8.0, 1.0, 4, 4) == "lod_c3_f7_k8_b1_l4_q4_trig.npz"


def test_assembler_validates_parameters(small_hierarchy, trig):
    with pytest.raises(ValueError):
        CorrectorAssembler(small_hierarchy, trig, 0.0, 1.0)
    with pytest.raises(ValueError):
        CorrectorAssembler(small_hierarchy, trig, 1.0, -0.5)
    with pytest.raises(ValueError):
        build_lod_space(small_hierarchy, trig, KAPPA, BETA, ell=0)


def test_element_correctors_lie_in_kernel(small_hierarchy, trig):
    coupling = assemble_coarse_fine_mass(small_hierarchy).S.toarray()
    correctors = element_corrector(small_hierarchy, trig, KAPPA, BETA, element=3, ell=1)
    assert len(correctors) == 3
    for corrector in correctors:
        np.testing.assert_allclose(coupling @ corrector.values, 0.0, atol=1e-12)
        assert np.linalg.norm(corrector.values) > 0.0

    imaginary = element_corrector(small_hierarchy, trig, KAPPA, BETA, element=3, ell=1, phase=1j)
    for real, rotated in zip(correctors, imaginary):
        np.testing.assert_allclose(rotated.values, 1j * real.values, atol=1e-12)


@pytest.mark.parametrize("ell", [1, 2])
def test_basis_reproduces_coarse_hats_under_projection(small_hierarchy, trig, ell):
    space = build_lod_space(small_hierarchy, trig, KAPPA, BETA, ell)
    coupling = assemble_coarse_fine_mass(small_hierarchy).S.toarray()
    coarse_mass = assemble_mass(small_hierarchy.coarse).S.toarray()
    assert space.dim == small_hierarchy.coarse.num_vertices == 9
    np.testing.assert_allclose(coupling @ space.basis.toarray(), coarse_mass, atol=1e-12)


def _dense_ideal_correctors(mh, potential, kappa, beta):
    H = assemble_abeta(mh.fine, potential, kappa, beta).hermitian().toarray()
    N = scipy.linalg.null_space(assemble_coarse_fine_mass(mh).S.toarray())
    P = mh.prolongation.toarray()
    reduced = N.T @ H @ N
    return N @ np.linalg.solve(reduced, N.T @ H @ P)


def test_ideal_correctors_match_dense_null_space_solve(small_hierarchy, trig):
    computed = ideal_correctors(small_hierarchy, trig, KAPPA, BETA).toarray()
    expected = _dense_ideal_correctors(small_hierarchy, trig, KAPPA, BETA)
    np.testing.assert_allclose(computed, expected, atol=1e-9)


def test_ideal_basis_is_orthogonal_to_fine_kernel(small_hierarchy, trig):
    space = build_ideal_lod_space(small_hierarchy, trig, KAPPA, BETA)
    assert space.ell is None
    assert space.space_id.endswith(":linf:trig")
    H = assemble_abeta(small_hierarchy.fine, trig, KAPPA, BETA).hermitian().toarray()
    N = scipy.linalg.null_space(assemble_coarse_fine_mass(small_hierarchy).S.toarray())
    residual = N.T @ H @ space.basis.toarray()
    assert np.abs(residual).max() < 1e-10


def test_saturated_patches_reproduce_ideal_space(small_hierarchy, trig):
    localized = build_lod_space(small_hierarchy, trig, KAPPA, BETA, ell=4)
    ideal = build_ideal_lod_space(small_hierarchy, trig, KAPPA, BETA)
    np.testing.assert_allclose(localized.basis.toarray(), ideal.basis.toarray(), atol=1e-9)


def test_basis_is_independent_of_pool_size(small_hierarchy, trig):
    serial = build_lod_space(small_hierarchy, trig, KAPPA, BETA, ell=1, max_workers=1)
    pooled = build_lod_space(small_hierarchy, trig, KAPPA, BETA, ell=1, max_workers=4)
    np.testing.assert_allclose(serial.basis.toarray(), pooled.basis.toarray(), rtol=0.0, atol=1e-14)
    np.testing.assert_allclose(serial.corrector_norms, pooled.corrector_norms, rtol=1e-13)


def test_coarse_operator_of_mass(small_hierarchy, trig):
    space = build_lod_space(small_hierarchy, trig, KAPPA, BETA, ell=1)
    fine_mass = assemble_mass(small_hierarchy.fine)
    restricted = coarse_operator(space, fine_mass)
    assert restricted.space_id == space.space_id
    assert restricted.shape == (9, 9)
    psi = space.basis.toarray()
    expected = psi.conj().T @ fine_mass.S.toarray() @ psi
    np.testing.assert_allclose(restricted.hermitian().toarray(), expected, atol=1e-13)
    with pytest.raises(SpaceMismatchError):
        coarse_operator(space, assemble_mass(small_hierarchy.coarse))


def test_decay_profile_is_nonincreasing(medium_hierarchy, trig):
    profile = corrector_decay_profile(medium_hierarchy, trig, 8.0, 1.0, element=0, ell_max=4)
    assert [ell for ell, _ in profile] == [0, 1, 2, 3]
    tails = [tail for _, tail in profile]
    assert tails[0] > 0.0
    assert all(later <= earlier + 1e-15 for earlier, later in zip(tails, tails[1:]))


def test_save_and_load_roundtrip(tmp_path, small_hierarchy, trig):
    space = build_lod_space(small_hierarchy, trig, KAPPA, BETA, ell=1)
    path = str(tmp_path / "cache" / lod_cache_key(1, 3, KAPPA, BETA, 1, 4))
    save_lod_space(space, path)

    loaded = load_lod_space(path, small_hierarchy)
    assert loaded.space_id == space.space_id
    assert loaded.quad_degree == 4
    np.testing.assert_array_equal(loaded.basis.toarray(), space.basis.toarray())
    np.testing.assert_array_equal(loaded.corrector_norms, space.corrector_norms)

    with pytest.raises(ValueError):
        load_lod_space(path, build_hierarchy(1, 4))


@pytest.mark.parametrize("ell", [1, 2])
def test_partition_of_unity_without_field(small_hierarchy, zero, ell):
    space = build_lod_space(small_hierarchy, zero, 1.0, 0.0, ell=ell)
    total = space.expand(ComplexField.constant(space.space_id, space.dim, 1.0))
    np.testing.assert_allclose(total.values, 1.0, atol=1e-9)


def test_best_approximation_improves_with_oversampling(medium_hierarchy, trig):
    ideal = build_ideal_lod_space(medium_hierarchy, trig, KAPPA, BETA)
    x, y = medium_hierarchy.coarse.vertices.T
    coefficients = np.cos(np.pi * x) * np.exp(1j * np.pi * y)
    reference = ideal.expand(ComplexField.from_complex(ideal.space_id, coefficients))
    gram = assemble_h1k_gram(medium_hierarchy.fine, KAPPA)

    errors = [
        best_approximation_error(build_lod_space(medium_hierarchy, trig, KAPPA, BETA, ell=ell), reference, gram)
        for ell in (1, 2, 3, 4)
    ]
    assert all(later <= earlier + 1e-10 for earlier, later in zip(errors, errors[1:]))
    assert errors[-1] < 0.1 * errors[0]
