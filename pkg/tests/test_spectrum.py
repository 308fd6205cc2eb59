import numpy as np
import pytest

from ginzburg_lod.assembly.fields import ComplexField
from ginzburg_lod.assembly.transfer import fine_space_map
from ginzburg_lod.glenergy.energy import build_energy_context
from ginzburg_lod.spectrum.report import (
    SpectrumReport,
    coercivity_trend,
    gauge_mode_residual,
    spectrum_at,
)

INVERSE_RHO = [(8, 1.7124e-2), (12, 1.2444e-2), (16, 1.1930e-3), (20, 4.0621e-5), (32, 3.8279e-4)]


@pytest.fixture
def superconducting_state(small_hierarchy, zero):
    ctx = build_energy_context(small_hierarchy, zero, 1.0, fine_space_map(small_hierarchy))
    return ctx, ComplexField.constant(ctx.space_id, ctx.dim, 1.0)


def test_spectrum_of_superconducting_state(superconducting_state):
    ctx, unit = superconducting_state
    report = spectrum_at(ctx, unit, k=4, tol=1e-9)

    assert report.kappa == 1.0
    assert report.energy == pytest.approx(0.0, abs=1e-14)
    assert report.zero_mode_overlap == pytest.approx(1.0, abs=1e-6)
    assert abs(report.l2_eigs[0]) < 1e-8
    assert report.l2_eigs[1] == pytest.approx(2.0, rel=1e-8)
    assert np.all(np.diff(report.l2_eigs[1:]) >= 0)
    assert abs(report.h1k_eigs[0]) < 1e-8
    assert 0.0 < report.rho_inv < 2.0
    assert report.rho_inv == report.h1k_eigs[1]
    assert report.gauge_ok


def test_gauge_mode_residual_vanishes_at_critical_point(superconducting_state):
    ctx, unit = superconducting_state
    assert gauge_mode_residual(ctx, unit) < 1e-12


def test_spectrum_needs_two_eigenvalues(superconducting_state):
    ctx, unit = superconducting_state
    with pytest.raises(ValueError):
        spectrum_at(ctx, unit, k=1)


def test_spectrum_requires_a_critical_point(superconducting_state):
    ctx, _ = superconducting_state
    half = ComplexField.constant(ctx.space_id, ctx.dim, 0.5)
    with pytest.raises(ValueError):
        spectrum_at(ctx, half, k=2)


def test_report_row():
    report = SpectrumReport(
        kappa=8.0,
        energy=0.1285,
        l2_eigs=np.array([1e-12, 4.1e-2]),
        h1k_eigs=np.array([1e-12, 1.7e-2]),
        rho_inv=1.7e-2,
        zero_mode_overlap=0.9999,
    )
    row = report.as_row()
    assert row["lambda_2"] == pytest.approx(4.1e-2)
    assert row["mu_2"] == pytest.approx(1.7e-2)
    assert row["rho_inv"] == pytest.approx(1.7e-2)
    assert row["converged"] is True
    assert row["gauge_ok"] is True


@pytest.mark.parametrize(
    "overlap, first", [(0.9, 1e-12), (0.9999, 1e-4)]
)
def test_report_flags_gauge_mismatch(overlap, first):
    report = SpectrumReport(8.0, 0.1285, np.array([first, 4.1e-2]), np.array([first, 1.7e-2]), 1.7e-2, overlap)
    assert not report.gauge_ok
    assert report.as_row()["gauge_ok"] is False


def test_coercivity_trend_without_kappa32():
    assert 6.0 < coercivity_trend(INVERSE_RHO) < 6.6


def test_coercivity_trend_with_kappa32():
    assert coercivity_trend(INVERSE_RHO, include_kappa32=True) == pytest.approx(3.71, abs=0.05)


def test_coercivity_trend_accepts_reports():
    reports = [
        SpectrumReport(kappa, 0.1, np.zeros(2), np.array([0.0, rho_inv]), rho_inv, 1.0)
        for kappa, rho_inv in INVERSE_RHO[:4]
    ]
    assert coercivity_trend(reports) == pytest.approx(coercivity_trend(INVERSE_RHO))


def test_coercivity_trend_validation():
    with pytest.raises(ValueError):
        coercivity_trend([(8, 1e-2), (8, 2e-2)])
    with pytest.raises(ValueError):
        coercivity_trend([(8, 1e-2), (32, 1e-3)])
    with pytest.raises(ValueError):
        coercivity_trend([(8, 1e-2), (12, -1e-3)])
