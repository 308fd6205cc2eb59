import numpy as np
import pytest

from ginzburg_lod.assembly.fields import ComplexField
from ginzburg_lod.assembly.transfer import coarse_space_map, fine_space_map
from ginzburg_lod.glenergy.energy import (
    build_energy_context,
    dual_norm,
    energy,
    gle_residual,
    gradient,
    hessian_operator,
)
from ginzburg_lod.lodspace.space import build_lod_space
from ginzburg_lod.mesh.hierarchy import build_hierarchy
from ginzburg_lod.utils.errors import SpaceMismatchError

STEP = 1e-6


def _random_field(rng, ctx, scale=1.0):
    return ComplexField(ctx.space_id, scale * rng.uniform(-1, 1, ctx.dim), scale * rng.uniform(-1, 1, ctx.dim))


def _shifted(v, w, t):
    return ComplexField(v.space_id, v.re + t * w.re, v.im + t * w.im)


def _assert_derivatives(ctx, rng):
    v = _random_field(rng, ctx)
    w = _random_field(rng, ctx)

    slope = (energy(ctx, _shifted(v, w, STEP)) - energy(ctx, _shifted(v, w, -STEP))) / (2 * STEP)
    predicted = gradient(ctx, v).stacked() @ w.stacked()
    assert predicted == pytest.approx(slope, rel=1e-6, abs=1e-9)

    change = (gradient(ctx, _shifted(v, w, STEP)).stacked() - gradient(ctx, _shifted(v, w, -STEP)).stacked()) / (
        2 * STEP
    )
    hessian = hessian_operator(ctx, v)
    np.testing.assert_allclose(hessian.apply(w), change, rtol=1e-5, atol=1e-7 * np.abs(change).max())
    assert np.abs(hessian.matrix - hessian.matrix.T).max() < 1e-12


@pytest.fixture
def fine_context(small_hierarchy, trig):
    return build_energy_context(small_hierarchy, trig, 8.0, fine_space_map(small_hierarchy))


def test_energy_of_zero_field(fine_context):
    assert energy(fine_context, fine_context.zeros()) == pytest.approx(0.25, abs=1e-14)


def test_energy_of_unit_field_without_potential(small_hierarchy, zero):
    ctx = build_energy_context(small_hierarchy, zero, 8.0, fine_space_map(small_hierarchy))
    unit = ComplexField.constant(ctx.space_id, ctx.dim, 1.0)
    assert energy(ctx, unit) == pytest.approx(0.0, abs=1e-14)
    assert gle_residual(ctx, unit) == pytest.approx(0.0, abs=1e-12)


def test_energy_is_gauge_invariant(fine_context, rng):
    v = _random_field(rng, fine_context)
    reference = energy(fine_context, v)
    for omega in (0.3, 1.7, np.pi):
        assert energy(fine_context, v.rotate(omega)) == pytest.approx(reference, rel=1e-12)


@pytest.mark.parametrize("kappa", [1.0, 8.0])
def test_fine_derivatives_match_finite_differences(small_hierarchy, trig, rng, kappa):
    ctx = build_energy_context(small_hierarchy, trig, kappa, fine_space_map(small_hierarchy))
    _assert_derivatives(ctx, rng)


def test_coarse_derivatives_match_finite_differences(small_hierarchy, trig, rng):
    ctx = build_energy_context(small_hierarchy, trig, 8.0, coarse_space_map(small_hierarchy))
    _assert_derivatives(ctx, rng)


def test_lod_derivatives_match_finite_differences(fine_context, small_hierarchy, trig, rng):
    lod = build_lod_space(small_hierarchy, trig, 8.0, 1.0, ell=1)
    ctx = fine_context.with_space(lod.space_map)
    assert ctx.dim == 9
    assert ctx.fine is fine_context.fine
    _assert_derivatives(ctx, rng)


def test_gradient_is_gauge_covariant(fine_context, rng):
    v = _random_field(rng, fine_context)
    g = gradient(fine_context, v)
    rotated = gradient(fine_context, v.rotate(0.9))
    np.testing.assert_allclose(rotated.values, np.exp(0.9j) * g.values, atol=1e-12)


def test_gauge_direction_is_in_hessian_kernel_at_critical_points(small_hierarchy, zero):
    ctx = build_energy_context(small_hierarchy, zero, 8.0, fine_space_map(small_hierarchy))
    unit = ComplexField.constant(ctx.space_id, ctx.dim, 1.0)
    hessian = hessian_operator(ctx, unit)
    np.testing.assert_allclose(hessian.apply(unit.times_i()), 0.0, atol=1e-12)
    assert hessian.quadratic(unit) == pytest.approx(2.0)


def test_dual_norm_of_mass_load(fine_context, rng):
    v = _random_field(rng, fine_context)
    load = ComplexField.from_stacked(fine_context.space_id, fine_context.mass.apply(v))
    assert dual_norm(fine_context, load) ** 2 == pytest.approx(fine_context.mass.quadratic(v), rel=1e-10)


def test_space_checks(fine_context, small_hierarchy, trig):
    coarse = ComplexField.zeros("p1:1", small_hierarchy.coarse.num_vertices)
    with pytest.raises(SpaceMismatchError):
        energy(fine_context, coarse)
    with pytest.raises(SpaceMismatchError):
        gradient(fine_context, coarse)
    with pytest.raises(ValueError):
        build_energy_context(small_hierarchy, trig, 8.0, fine_space_map(build_hierarchy(1, 2)))
    with pytest.raises(ValueError):
        build_energy_context(small_hierarchy, trig, 0.0, fine_space_map(small_hierarchy))
