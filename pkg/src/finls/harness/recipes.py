"""Experiment recipes behind the CLI subcommands.

Each ``cmd_*`` takes a validated ExperimentConfig and an output directory,
writes its artifacts plus a ``*_manifest.json`` and returns
``(exit_code, results)``.
"""

import json
import math
from pathlib import Path

import numpy as np

from ..diagnostics import DiagnosticsRecord, local_decay_scan
from ..dynamics import Outcome, dispersive_decay_check, evolve, scattering_monitor
from ..errors import ConvergenceError, ValidationError
from ..ground_state import solve_ground_state
from ..model import Regime, WeightField, classify_threshold
from ..spectral import Field
from .config import FileData, GaussianData, GroundScaled, config_hash
from .io import CsvStream, read_snapshot, write_csv, write_manifest, write_snapshot

__all__ = [
    "EXIT_OK",
    "EXIT_VALIDATION",
    "EXIT_NUMERICAL",
    "EXIT_PROPERTY",
    "solve_ground",
    "initial_field",
    "run_trajectory",
    "cmd_ground",
    "cmd_evolve",
    "cmd_dichotomy",
    "cmd_linear",
    "dichotomy_verdict",
]

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3
EXIT_PROPERTY = 4


def _out(out_dir):
    p = Path(out_dir)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _tolerances(cfg):
    c = cfg.controls
    return {
        "ground_tol": cfg.ground.tol,
        "ground_residual_target": cfg.ground.residual_target,
        "mass_drift": 1e-10,
        "energy_drift": 1e-6,
        "boundary_tol": c.boundary_tol,
        "gradient_cap": c.gradient_cap,
        "dt_floor": c.build().dt_floor,
        "scattering_tol": cfg.diagnostics.scattering_tol,
        "classifier_band": 1e-6,
    }


def _weight(cfg, grid, params):
    return WeightField.build(grid, params.b, cfg.grid.weight_origin)


def solve_ground(cfg, params=None, grid=None):
    params = params or cfg.model_params()
    grid = grid or cfg.build_grid()
    w = _weight(cfg, grid, params)
    return solve_ground_state(params, grid, opts=cfg.ground.build(), weight=w)


def initial_field(cfg, grid, ground=None, base_dir="."):
    init = cfg.initial_data
    if isinstance(init, GroundScaled):
        if ground is None:
            raise ValidationError("ground_scaled initial data needs a ground state")
        return ground.Q * init.c
    if isinstance(init, GaussianData):
        drift = list(init.drift) or [0.0] * grid.dim
        if len(drift) != grid.dim:
            raise ValidationError(f"drift must have {grid.dim} components")
        r2 = grid.radius**2
        phase = sum(v * x for v, x in zip(drift, grid.coords))
        vals = init.amplitude * np.exp(-r2 / (2 * init.width**2) + 1j * phase)
        return Field(grid, vals)
    if isinstance(init, FileData):
        path = Path(init.path)
        if not path.is_absolute():
            path = Path(base_dir) / path
        f, _ = read_snapshot(path)
        if f.grid != grid:
            raise ValidationError(f"snapshot grid {f.grid} does not match config grid {grid}")
        return f
    raise ValidationError(f"unknown initial data {init!r}")  # pragma: no cover


def _ground_results(gs):
    d = gs.summary()
    d["norm_Q"] = gs.norm_Q
    d["pohozaev_relative"] = [x / gs.mass_Q for x in gs.pohozaev_residuals()]
    return d


# --------------------------------------------------------------- ground


def cmd_ground(cfg, out_dir):
    out = _out(out_dir)
    params = cfg.model_params()
    try:
        gs = solve_ground(cfg, params)
    except ConvergenceError as exc:
        (out / "ground_history.json").write_text(json.dumps(exc.history, indent=1))
        write_manifest(
            out / "ground_manifest.json", "ground", config_hash(cfg), _tolerances(cfg),
            {"status": "convergence_failure", "message": str(exc)}, ["ground_history.json"],
        )
        return EXIT_NUMERICAL, {"status": "convergence_failure", "message": str(exc)}
    write_snapshot(out / "ground_Q.snap", gs.Q, 0.0, params, {"kind": "ground_state"})
    res = _ground_results(gs)
    ok = gs.residual <= cfg.ground.residual_target * gs.norm_Q
    res["status"] = "converged" if ok else "residual_target_missed"
    write_manifest(out / "ground_manifest.json", "ground", config_hash(cfg), _tolerances(cfg), res,
                   ["ground_Q.snap"])
    return (EXIT_OK if ok else EXIT_NUMERICAL), res


# --------------------------------------------------------------- evolve


def run_trajectory(cfg, out, ground=None, prefix="evolve"):
    """Evolve the configured initial data, streaming the series CSV."""
    params = cfg.model_params()
    grid = cfg.build_grid()
    w = ground.weight if ground is not None else _weight(cfg, grid, params)
    u0 = initial_field(cfg, grid, ground)
    ctl = cfg.controls.build()
    radii = tuple(cfg.diagnostics.radii)
    series = out / f"{prefix}_series.csv"
    with CsvStream(series, DiagnosticsRecord.header(radii)) as stream:
        traj = evolve(
            u0, params, ctl, weight=w, ground=ground, radii=radii,
            virial_radius=cfg.diagnostics.virial_radius,
            sink=lambda rec: stream.put(rec.row(radii)),
        )
    artifacts = [series.name]
    for t, f in sorted(traj.snapshots.items()):
        name = f"{prefix}_t{t:.6f}.snap"
        write_snapshot(out / name, f, t, params)
        artifacts.append(name)
    write_snapshot(out / f"{prefix}_final.snap", traj.final_state, traj.final_time, params)
    artifacts.append(f"{prefix}_final.snap")
    return traj, artifacts


def _trajectory_results(cfg, traj, out, prefix):
    res = {
        "outcome": traj.outcome.value,
        "final_time": traj.final_time,
        "steps": traj.steps,
        "mass_drift": traj.mass_drift,
        "energy_drift": traj.energy_drift,
        "flags": traj.flags,
        "max_kinetic": float(max(r.kinetic for r in traj.records)),
        "initial_kinetic": traj.records[0].kinetic,
        "final_dt": traj.dt_history[-1][1] if traj.dt_history else None,
    }
    if traj.outcome is Outcome.BLOW_UP:
        res["collapse_time_estimate"] = traj.final_time
        res["kinetic_growth"] = math.sqrt(traj.records[-1].kinetic / traj.records[0].kinetic)
    artifacts = []
    if traj.outcome is Outcome.COMPLETED and traj.controls.scattering_samples >= 2:
        rep = scattering_monitor(traj, cfg.diagnostics.scattering_tol)
        res["scattering"] = rep.to_dict()
    if len(traj.records) >= 4:
        try:
            table = local_decay_scan(traj.records, tuple(cfg.diagnostics.radii))
        except Exception as exc:  # too few samples in the window
            res["decay_scan_error"] = str(exc)
        else:
            name = f"{prefix}_decay_table.csv"
            cols = list(table[0].keys())
            write_csv(out / name, cols, [[row[c] for c in cols] for row in table])
            res["decay_scan"] = table
            artifacts.append(name)
    return res, artifacts


def cmd_evolve(cfg, out_dir):
    out = _out(out_dir)
    ground = None
    if isinstance(cfg.initial_data, GroundScaled) or cfg.params.sign == "focusing":
        ground = solve_ground(cfg)
    traj, artifacts = run_trajectory(cfg, out, ground)
    res, more = _trajectory_results(cfg, traj, out, "evolve")
    write_manifest(out / "evolve_manifest.json", "evolve", config_hash(cfg), _tolerances(cfg), res,
                   artifacts + more)
    return EXIT_OK, res


# ------------------------------------------------------------ dichotomy


def dichotomy_verdict(regime, outcome):
    if regime is Regime.INDETERMINATE:
        return None
    if regime is Regime.GLOBAL:
        return "AGREE" if outcome is Outcome.COMPLETED else "DISAGREE"
    return "AGREE" if outcome is Outcome.BLOW_UP else "DISAGREE"


def _monitored(traj, ground, params):
    gam = params.exponents.gamma_c
    thr = ground.potential_Q * ground.mass_Q**gam
    pm = np.array([r.potential * r.mass**gam for r in traj.records]) / thr
    virial = np.array([r.virial for r in traj.records])
    return {
        "ss1_ratio_max": float(pm.max()),
        "ss1_ratio_min": float(pm.min()),
        "virial_max": float(virial.max()),
        "virial_min": float(virial.min()),
    }


def cmd_dichotomy(cfg, out_dir, ground=None):
    out = _out(out_dir)
    params = cfg.model_params()
    grid = cfg.build_grid()
    ground = ground or solve_ground(cfg, params, grid)
    u0 = initial_field(cfg, grid, ground)
    report = classify_threshold(u0, ground, params, ground.weight)
    res = {"classification": report.to_dict(), "predicted": report.regime.value}
    artifacts = []
    if report.regime is Regime.INDETERMINATE:
        res["verdict"] = None
        res["observed"] = None
    else:
        traj, artifacts = run_trajectory(cfg, out, ground, prefix="dichotomy")
        tres, more = _trajectory_results(cfg, traj, out, "dichotomy")
        artifacts += more
        res.update(tres)
        res["observed"] = traj.outcome.value
        res["verdict"] = dichotomy_verdict(report.regime, traj.outcome)
        res["monitored"] = _monitored(traj, ground, params)
    (out / "dichotomy_report.json").write_text(json.dumps(_clean(res), indent=2, sort_keys=True) + "\n")
    artifacts.append("dichotomy_report.json")
    write_manifest(out / "dichotomy_manifest.json", "dichotomy", config_hash(cfg), _tolerances(cfg),
                   res, artifacts)
    return EXIT_OK, res


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return None if math.isnan(x) else (str(x) if math.isinf(x) else x)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


# --------------------------------------------------------------- linear


def cmd_linear(cfg, out_dir):
    out = _out(out_dir)
    params = cfg.model_params()
    grid = cfg.build_grid()
    init = cfg.initial_data
    if not isinstance(init, GaussianData):
        init = GaussianData(kind="gaussian")
    phi = initial_field(cfg.model_copy(update={"initial_data": init}), grid)
    fits = dispersive_decay_check(phi, params, cfg.linear.times, cfg.linear.exponent_values(),
                                  cfg.linear.boundary_tol)
    rows = [[f.r, f.slope, f.predicted, f.relative_error] for f in fits]
    write_csv(out / "linear_slopes.csv", ["r", "slope", "predicted", "relative_error"], rows)
    res = {
        "fits": [
            {"r": f.r, "slope": f.slope, "predicted": f.predicted, "relative_error": f.relative_error,
             "norms": f.norms, "times": f.times}
            for f in fits
        ]
    }
    write_manifest(out / "linear_manifest.json", "linear", config_hash(cfg), _tolerances(cfg), res,
                   ["linear_slopes.csv"])
    return EXIT_OK, res

