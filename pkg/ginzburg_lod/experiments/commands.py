"""
Experiment Commands Module

This module provides functionality to run the subcommands of the command-line
harness: single minimizations, convergence, localization-decay, spectrum and
best-approximation sweeps, and field export for vortex plots.
"""
import logging
import os
from collections import OrderedDict
from typing import Any, Dict, List, Tuple

import numpy as np

from ..analysis.errors import (
    ErrorRecord,
    best_approximation_error,
    count_local_minima,
    decay_factor,
    error_h1k,
    error_l2,
    fit_decay,
    fit_rate,
)
from ..assembly.fields import ComplexField
from ..csv_utils.generator import generate_csv
from ..field_utils.fieldfile import read_field, sample_modulus_grid, write_field
from ..minimize.descent import MinimizeConfig, MinimizeResult, align_phase, context_for_config, minimize
from ..mesh.hierarchy import build_hierarchy
from ..spectrum.report import SpectrumReport, coercivity_trend, spectrum_at
from ..utils.config import config_hash, experiment_config
from .runner import (
    approximate,
    compute_references,
    fine_context,
    grid,
    hierarchy_for,
    lod_space_for,
    minimize_config,
    run_ordered,
)

logger = logging.getLogger(__name__)

ERROR_COLUMNS = [
    "space", "kappa", "beta", "ell", "coarse_h", "fine_h", "seed",
    "err_h1k", "err_l2", "err_best", "energy", "iters", "energy_ref", "status",
]
DECAY_COLUMNS = [
    "space", "kappa", "beta", "ell", "ell_ref", "coarse_h", "fine_h", "seed",
    "err_h1k", "err_l2", "energy", "iters", "status",
]
DECAY_REFERENCE_OFFSET = 5
MONOTONICITY_SLACK = 1e-11


def cmd_minimize(config: Dict[str, Any]) -> MinimizeResult:
    """
    Compute one discrete minimizer and write its fine representation to a field file.

    Args:
        config (Dict[str, Any]): Flat configuration of the minimize subcommand

    Returns:
        MinimizeResult: The descent outcome
    """
    settings = MinimizeConfig(
        space=config["space"],
        kappa=config["kappa"],
        beta=config["beta"],
        ell=config["ell"],
        coarse_k=config["coarse_k"],
        fine_k=config["fine_k"],
        delta=config["delta"],
        max_iters=config["max_iters"],
        seed=config["seed"],
        potential=config["potential"],
        max_workers=config.get("max_workers"),
    )
    mh = build_hierarchy(settings.coarse_k, settings.fine_k)
    ctx = context_for_config(settings, mh)

    try:
        result = minimize(settings, context=ctx)
    except Exception as e:
        logger.error(f"Minimization in {ctx.space_id} failed: {str(e)}")
        raise

    metadata = {
        "space": settings.space,
        "kappa": settings.kappa,
        "beta": settings.beta,
        "ell": settings.ell if settings.space == "lod" else 0,
        "seed": settings.seed,
        "fine_k": settings.fine_k,
        "coarse_k": settings.coarse_k,
        "delta": settings.delta,
        "potential": settings.potential,
        "energy": result.energy,
        "iters": result.iters,
        "residual": result.residual,
    }
    write_field(config["out"], ctx.expand(result.u), settings.fine_k, metadata)
    print(
        f"space={settings.space} kappa={settings.kappa:g} energy={result.energy:.12e} "
        f"iters={result.iters} residual={result.residual:.3e} stop={result.stop_reason}"
    )
    return result


def _rate_rows(records: List[ErrorRecord], drop_coarsest: bool) -> List[Dict[str, Any]]:
    series: "OrderedDict[Tuple, List[Tuple[float, float]]]" = OrderedDict()
    for record in records:
        key = (record.space, record.kappa, record.beta, record.ell, record.seed)
        series.setdefault(key, [])
        if record.status == "ok" and np.isfinite(record.err_h1k) and record.err_h1k > 0:
            series[key].append((record.coarse_h, record.err_h1k))

    rows = []
    for (space, kappa, beta, ell, seed), pairs in series.items():
        row = {"space": space, "kappa": kappa, "beta": beta, "ell": ell, "seed": seed, "points": len(pairs)}
        try:
            row["rate"] = fit_rate(pairs, drop_coarsest=drop_coarsest and len(pairs) > 2)
            row["status"] = "ok"
        except ValueError as e:
            row["rate"] = float("nan")
            row["status"] = f"error: {str(e)}"
        rows.append(row)
    return rows


def cmd_convergence(config: Dict[str, Any]) -> List[ErrorRecord]:
    """
    H^1_kappa errors of coarse FEM and LOD minimizers against fine references.

    Writes convergence.csv (one row per space, kappa, beta, ell, coarse level
    and seed) and convergence_rates.csv (fitted slope per series).

    Args:
        config (Dict[str, Any]): Flat sweep configuration

    Returns:
        List[ErrorRecord]: Rows in output order
    """
    exp = experiment_config(config)
    exp.validate()
    digest = config_hash(config)
    references = compute_references(exp)
    hierarchies = {coarse_k: hierarchy_for(exp, coarse_k) for coarse_k in sorted(exp.coarse_ks)}

    jobs = OrderedDict()
    for kappa in exp.kappas:
        for seed in exp.seeds:
            for coarse_k in sorted(exp.coarse_ks):
                jobs[("coarse_fem", kappa, 0.0, 0, coarse_k, seed)] = (
                    lambda mh=hierarchies[coarse_k], ref=references[(kappa, seed)]:
                    approximate(exp, mh, ref, "coarse_fem")
                )
    for kappa, beta, ell, coarse_k in grid(exp):
        mh = hierarchies[coarse_k]
        try:
            space = lod_space_for(exp, mh, kappa, beta, ell)
        except Exception as e:
            logger.error(f"LOD space kappa={kappa:g} beta={beta:g} ell={ell} coarse_k={coarse_k} failed: {str(e)}")
            space = None
        for seed in exp.seeds:
            jobs[("lod", kappa, beta, ell, coarse_k, seed)] = (
                lambda mh=mh, ref=references[(kappa, seed)], beta=beta, ell=ell, space=space:
                approximate(exp, mh, ref, "lod", beta, ell, space)
            )

    records = list(run_ordered(jobs, exp.max_workers).values())
    rows = [record.as_row() for record in records]
    generate_csv(rows, os.path.join(exp.out_dir, "convergence.csv"), ERROR_COLUMNS, digest)
    generate_csv(
        _rate_rows(records, exp.drop_coarsest), os.path.join(exp.out_dir, "convergence_rates.csv"), config_hash=digest
    )

    for record in records:
        if record.status == "ok" and record.err_best > record.err_h1k + 1e-12:
            logger.warning(
                f"Best approximation {record.err_best:.6e} exceeds the minimizer error {record.err_h1k:.6e} "
                f"({record.space}, h={record.coarse_h:g})"
            )
    return records


def _decay_series(exp, kappa: float, beta: float, coarse_k: int, seed: int) -> List[Dict[str, Any]]:
    mh = hierarchy_for(exp, coarse_k)
    fine_ctx = fine_context(exp, kappa, mh)
    ell_ref = max(exp.ells) + DECAY_REFERENCE_OFFSET

    reference_space = lod_space_for(exp, mh, kappa, beta, ell_ref)
    ref_ctx = fine_ctx.with_space(reference_space.space_map)
    ref_config = minimize_config(exp, "lod", kappa, seed, beta=beta, ell=ell_ref, coarse_k=coarse_k)
    ref_result = minimize(ref_config, context=ref_ctx)
    ref_fine = ref_ctx.expand(ref_result.u)

    rows = []
    previous = float("inf")
    for ell in sorted(set(exp.ells)):
        if ell >= ell_ref:
            continue
        row: Dict[str, Any] = {
            "space": "lod", "kappa": kappa, "beta": beta, "ell": ell, "ell_ref": ell_ref,
            "coarse_h": mh.coarse.h, "fine_h": mh.fine.h, "seed": seed, "status": "ok",
        }
        try:
            space = lod_space_for(exp, mh, kappa, beta, ell)
            ctx = fine_ctx.with_space(space.space_map)
            initial = ComplexField(ctx.space_id, ref_result.u.re, ref_result.u.im) if exp.warm_start else None
            config = minimize_config(exp, "lod", kappa, seed, beta=beta, ell=ell, coarse_k=coarse_k)
            result = minimize(config, context=ctx, initial=initial)
            aligned = align_phase(ctx.expand(result.u), ref_fine, fine_ctx.fine_mass)
            row["err_h1k"] = error_h1k(aligned, ref_fine, fine_ctx.fine.gram, fine_ctx.fine_mass)
            row["err_l2"] = error_l2(aligned, ref_fine, fine_ctx.fine_mass)
            row["energy"] = result.energy
            row["iters"] = result.iters
            if not result.converged:
                row["status"] = "max_iters"
            if row["err_h1k"] > previous + MONOTONICITY_SLACK:
                logger.warning(
                    f"Localization error grows from {previous:.6e} to {row['err_h1k']:.6e} at ell={ell} "
                    f"(kappa={kappa:g}, beta={beta:g}, coarse_k={coarse_k})"
                )
            previous = row["err_h1k"]
        except Exception as e:
            logger.error(f"Decay run ell={ell} failed: {str(e)}")
            row["status"] = f"error: {type(e).__name__}: {str(e)}"
        rows.append(row)
    return rows


def cmd_decay(config: Dict[str, Any]) -> Tuple[List[Dict[str, Any]], List[Dict[str, Any]]]:
    """
    Localization error eps_l = ||u_l - u_ref||_{H^1_kappa} of LOD minimizers.

    The reference is the LOD minimizer with max(ells) + 5 layers. Writes
    decay.csv and decay_rates.csv (fitted r and theta = exp(-r) per series).

    Args:
        config (Dict[str, Any]): Flat sweep configuration

    Returns:
        Tuple[List[Dict[str, Any]], List[Dict[str, Any]]]: Error rows and rate rows
    """
    exp = experiment_config(config)
    exp.validate()
    digest = config_hash(config)

    jobs = OrderedDict(
        ((kappa, beta, coarse_k, seed), lambda kappa=kappa, beta=beta, coarse_k=coarse_k, seed=seed:
            _decay_series(exp, kappa, beta, coarse_k, seed))
        for kappa in exp.kappas
        for beta in exp.betas
        for coarse_k in sorted(exp.coarse_ks)
        for seed in exp.seeds
    )
    series = run_ordered(jobs, exp.max_workers)

    rows: List[Dict[str, Any]] = []
    rate_rows: List[Dict[str, Any]] = []
    for (kappa, beta, coarse_k, seed), series_rows in series.items():
        rows.extend(series_rows)
        pairs = [
            (row["ell"], row["err_h1k"]) for row in series_rows
            if row["status"] == "ok" and row.get("err_h1k", 0.0) > 0
        ]
        rate_row: Dict[str, Any] = {
            "kappa": kappa, "beta": beta, "coarse_h": 2.0 ** -coarse_k, "seed": seed, "points": len(pairs),
        }
        try:
            rate = fit_decay(pairs)
            rate_row.update({"rate": rate, "theta": decay_factor(rate), "status": "ok"})
        except ValueError as e:
            rate_row.update({"rate": float("nan"), "theta": float("nan"), "status": f"error: {str(e)}"})
        rate_rows.append(rate_row)

    generate_csv(rows, os.path.join(exp.out_dir, "decay.csv"), DECAY_COLUMNS, digest)
    generate_csv(rate_rows, os.path.join(exp.out_dir, "decay_rates.csv"), config_hash=digest)
    return rows, rate_rows


def cmd_spectrum(config: Dict[str, Any]) -> Tuple[List[SpectrumReport], List[Dict[str, Any]]]:
    """
    Smallest eigenvalues of E''(u_ref) per kappa and the fitted coercivity exponent.

    Writes spectrum.csv and, for at least two distinct kappa, spectrum_trend.csv.

    Args:
        config (Dict[str, Any]): Flat sweep configuration

    Returns:
        Tuple[List[SpectrumReport], List[Dict[str, Any]]]: Reports and trend rows
    """
    exp = experiment_config(config)
    exp.validate()
    digest = config_hash(config)
    references = compute_references(exp)

    reports: List[SpectrumReport] = []
    rows: List[Dict[str, Any]] = []
    lowest: "OrderedDict[float, SpectrumReport]" = OrderedDict()
    for (kappa, seed), reference in references.items():
        try:
            report = spectrum_at(reference.context, reference.u, k=exp.num_eigs)
        except ValueError as e:
            logger.error(f"Spectrum skipped for kappa={kappa:g} seed={seed}: {str(e)}")
            rows.append({"seed": seed, "kappa": kappa, "status": f"error: {str(e)}"})
            continue
        reports.append(report)
        status = "ok" if report.gauge_ok else "gauge_mismatch"
        rows.append(dict({"seed": seed}, status=status, **report.as_row()))
        if kappa not in lowest or report.energy < lowest[kappa].energy:
            lowest[kappa] = report

    generate_csv(rows, os.path.join(exp.out_dir, "spectrum.csv"), config_hash=digest)

    trend_rows: List[Dict[str, Any]] = []
    for include in (False, True):
        try:
            alpha = coercivity_trend(list(lowest.values()), include_kappa32=include)
        except ValueError as e:
            logger.info(f"Coercivity trend (include_kappa32={include}) skipped: {str(e)}")
            continue
        trend_rows.append({
            "include_kappa32": include,
            "alpha": alpha,
            "kappas": len(lowest),
            "primary": include == exp.include_kappa32,
        })
        logger.info(f"Coercivity trend rho ~ kappa^{alpha:.4f} (include_kappa32={include})")
    if trend_rows:
        generate_csv(trend_rows, os.path.join(exp.out_dir, "spectrum_trend.csv"), config_hash=digest)
    return reports, trend_rows


def _check_best_monotone(rows: List[Dict[str, Any]]) -> int:
    """Warn for every ell at which err_best exceeds its value at the next smaller ell; returns the count."""
    series: "OrderedDict[Tuple, List[Tuple[int, float]]]" = OrderedDict()
    for row in rows:
        key = (row["kappa"], row["beta"], row["coarse_h"], row["seed"])
        series.setdefault(key, []).append((row["ell"], row["err_best"]))

    violations = 0
    for (kappa, beta, coarse_h, seed), points in series.items():
        points.sort()
        for (ell_a, err_a), (ell_b, err_b) in zip(points, points[1:]):
            if err_b > err_a + MONOTONICITY_SLACK:
                violations += 1
                logger.warning(
                    f"Best-approximation error grows from {err_a:.6e} (ell={ell_a}) to {err_b:.6e} (ell={ell_b}) "
                    f"at kappa={kappa:g}, beta={beta:g}, h={coarse_h:g}, seed={seed}"
                )
    return violations


def cmd_best_approx(config: Dict[str, Any]) -> List[Dict[str, Any]]:
    """
    H^1_kappa distance of each fine reference to the LOD spaces of the sweep grid.

    Writes best_approximation.csv.

    Args:
        config (Dict[str, Any]): Flat sweep configuration

    Returns:
        List[Dict[str, Any]]: Rows in output order
    """
    exp = experiment_config(config)
    exp.validate()
    digest = config_hash(config)
    references = compute_references(exp)

    rows: List[Dict[str, Any]] = []
    for kappa, beta, ell, coarse_k in grid(exp):
        mh = hierarchy_for(exp, coarse_k)
        space = lod_space_for(exp, mh, kappa, beta, ell)
        for seed in exp.seeds:
            reference = references[(kappa, seed)]
            err = best_approximation_error(space, reference.u, reference.context.fine.gram)
            rows.append({
                "space": "lod", "kappa": kappa, "beta": beta, "ell": ell,
                "coarse_h": mh.coarse.h, "fine_h": mh.fine.h, "seed": seed, "err_best": err,
            })
            logger.info(f"Best approximation kappa={kappa:g} beta={beta:g} ell={ell} h={mh.coarse.h:g}: {err:.4e}")

    _check_best_monotone(rows)
    generate_csv(rows, os.path.join(exp.out_dir, "best_approximation.csv"), config_hash=digest)
    return rows


def cmd_export_field(config: Dict[str, Any]) -> Dict[str, Any]:
    """
    Sample |u| of a field file on an n x n grid and write rows x, y, abs_u.

    Args:
        config (Dict[str, Any]): Flat configuration of the export-field subcommand

    Returns:
        Dict[str, Any]: Summary with min, max and the vortex-core count below the threshold
    """
    field_file = read_field(config["input"])
    xx, yy, modulus = sample_modulus_grid(field_file, config["grid_n"])
    rows = [
        {"x": x, "y": y, "abs_u": value}
        for x, y, value in zip(xx.ravel(), yy.ravel(), modulus.ravel())
    ]
    generate_csv(rows, config["output"], ["x", "y", "abs_u"], config_hash(config))

    summary = {
        "min_abs_u": float(modulus.min()),
        "max_abs_u": float(modulus.max()),
        "vortices": count_local_minima(modulus, config["threshold"]),
    }
    logger.info(
        f"Exported {config['grid_n']}x{config['grid_n']} grid of {config['input']}: "
        f"min |u|={summary['min_abs_u']:.4f}, max |u|={summary['max_abs_u']:.4f}, vortices={summary['vortices']}"
    )
    return summary


COMMANDS = {
    "minimize": cmd_minimize,
    "convergence": cmd_convergence,
    "decay": cmd_decay,
    "spectrum": cmd_spectrum,
    "best-approx": cmd_best_approx,
    "export-field": cmd_export_field,
}
