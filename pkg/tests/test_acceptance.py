"""Desk-scale reproduction runs. Minutes each; enabled with --runslow."""
import numpy as np
import pytest

from ginzburg_lod.analysis.errors import count_local_minima, fit_rate
from ginzburg_lod.assembly.potential import default_potential
from ginzburg_lod.assembly.transfer import fine_space_map
from ginzburg_lod.experiments.commands import cmd_convergence, cmd_decay, cmd_spectrum
from ginzburg_lod.field_utils.fieldfile import read_field, sample_modulus_grid
from ginzburg_lod.glenergy.energy import build_energy_context, energy
from ginzburg_lod.main import main
from ginzburg_lod.mesh.hierarchy import build_hierarchy
from ginzburg_lod.minimize.descent import MinimizeConfig, minimize
from ginzburg_lod.spectrum.report import gauge_mode_residual, spectrum_at
from ginzburg_lod.utils.config import parse_args

pytestmark = pytest.mark.slow

PUBLISHED_LOD_ERRORS = {
    1.0: {2.0 ** -2: 2.6467e-01, 2.0 ** -3: 2.2555e-02, 2.0 ** -4: 1.7957e-03},
    0.0: {2.0 ** -2: 1.3047e-01, 2.0 ** -3: 1.2857e-02, 2.0 ** -4: 8.6298e-04},
}


def _sweep(command, tmp_path, *flags):
    return parse_args([command, *flags, "--out-dir", str(tmp_path / command)])


def test_reference_energy_at_kappa_8():
    result = minimize(MinimizeConfig(space="fine_fem", kappa=8.0, fine_k=7, coarse_k=3, seed=1))
    assert result.energy == pytest.approx(1.2853e-01, abs=2e-3)


def test_gauge_structure_at_converged_minimizer():
    mh = build_hierarchy(3, 6)
    ctx = build_energy_context(mh, default_potential(), 8.0, fine_space_map(mh))
    result = minimize(MinimizeConfig(space="fine_fem", kappa=8.0, fine_k=6, coarse_k=3, delta=1e-14), context=ctx)
    u = result.u

    assert energy(ctx, u.rotate(0.7)) == pytest.approx(result.energy, abs=1e-12)
    assert gauge_mode_residual(ctx, u) <= 1e-6 * np.sqrt(ctx.gram.quadratic(u))

    report = spectrum_at(ctx, u, k=4)
    assert abs(report.l2_eigs[0]) <= 1e-6 * report.l2_eigs[1]
    assert report.zero_mode_overlap >= 0.999


def test_spectrum_at_kappa_8(tmp_path):
    reports, _ = cmd_spectrum(_sweep("spectrum", tmp_path, "--kappas", "8", "--fine-k", "7", "--seeds", "1"))
    report = reports[0]
    assert report.l2_eigs[1] == pytest.approx(4.1479e-02, rel=0.1)
    assert report.rho_inv == pytest.approx(1.7124e-02, rel=0.1)


def test_lod_convergence_at_kappa_8(tmp_path):
    records = cmd_convergence(_sweep("convergence", tmp_path, "--preset", "convergence", "--kappas", "8"))
    assert all(record.status == "ok" for record in records)
    fem = {record.coarse_h: record.err_h1k for record in records if record.space == "coarse_fem"}
    lod = {
        (record.beta, record.coarse_h): record.err_h1k for record in records if record.space == "lod"
    }

    for (beta, coarse_h), err in lod.items():
        assert err < fem[coarse_h]
        published = PUBLISHED_LOD_ERRORS[beta][coarse_h]
        assert published / 3.0 <= err <= 3.0 * published
    for record in records:
        if record.space == "lod":
            assert record.err_best <= record.err_h1k + 1e-12

    for beta in (0.0, 1.0):
        assert fit_rate([(h, err) for (b, h), err in lod.items() if b == beta]) >= 2.5

    for coarse_h in (2.0 ** -3, 2.0 ** -4):
        assert lod[(0.0, coarse_h)] <= lod[(1.0, coarse_h)]
        assert fem[coarse_h] / lod[(0.0, coarse_h)] >= 10.0


def test_localization_decay(tmp_path):
    flags = ["--kappas", "16", "--betas", "0", "--coarse-ks", "4", "--fine-k", "7",
             "--ells", "1", "2", "3", "4", "5", "6", "7", "8"]
    rows, rate_rows = cmd_decay(_sweep("decay", tmp_path, *flags))
    assert all(row["ell_ref"] == 13 for row in rows)
    errors = [row["err_h1k"] for row in rows]
    assert all(later <= earlier + 1e-11 for earlier, later in zip(errors, errors[1:]))
    assert rate_rows[0]["rate"] >= 0.6


def test_lod_captures_vortex_count(tmp_path):
    counts = []
    for space, extra in (("fem", []), ("lod", ["--coarse-k", "3", "--ell", "4", "--beta", "0"])):
        out = str(tmp_path / f"{space}.glf")
        assert main(["minimize", "--space", space, "--kappa", "8", "--fine-k", "7", "--seed", "1", *extra,
                     "--out", out]) == 0
        _, _, modulus = sample_modulus_grid(read_field(out), n=129)
        counts.append(count_local_minima(modulus, threshold=0.3))
    assert counts[0] > 0
    assert counts[1] == counts[0]
