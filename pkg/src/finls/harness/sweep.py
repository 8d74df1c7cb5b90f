"""Parameter sweeps over (s, b, p, c) with a crash-safe journal.

Every finished point is appended to ``sweep_journal.jsonl`` by the parent
process. ``--resume`` skips points already in the journal, so a killed sweep
picks up where it stopped and produces the same table as an uninterrupted
one. Results are always written in axis order, independent of completion
order and worker count.
"""

import itertools
from concurrent.futures import ProcessPoolExecutor, as_completed
from pathlib import Path

from ..errors import FinlsError, ValidationError
from .config import GroundScaled, config_hash, validate_physics
from .io import Journal, write_csv, write_manifest
from .recipes import EXIT_NUMERICAL, EXIT_OK, cmd_dichotomy

__all__ = ["sweep_points", "point_key", "run_point", "run_sweep", "RESULT_COLUMNS"]

RESULT_COLUMNS = [
    "key", "s", "b", "p", "c", "status", "predicted", "observed", "verdict",
    "ME", "MG", "virial", "final_time", "mass_drift", "energy_drift",
]


def point_key(s, b, p, c):
    return f"s={s!r},b={b!r},p={p!r},c={c!r}"


def sweep_points(spec):
    """Cartesian product of the axes; an empty axis takes the template value."""
    t = spec.template
    base_c = t.initial_data.c if isinstance(t.initial_data, GroundScaled) else 1.0
    axes = spec.axes
    s_vals = axes.s or [t.params.s]
    b_vals = axes.b or [t.params.b]
    p_vals = axes.p or [t.params.p]
    c_vals = axes.c or [base_c]
    return [
        {"key": point_key(s, b, p, c), "s": s, "b": b, "p": p, "c": c}
        for s, b, p, c in itertools.product(s_vals, b_vals, p_vals, c_vals)
    ]


def _point_config(template, pt):
    params = template.params.model_copy(update={"s": pt["s"], "b": pt["b"], "p": pt["p"]})
    init = GroundScaled(kind="ground_scaled", c=pt["c"])
    return template.model_copy(update={"params": params, "initial_data": init})


def run_point(template, pt, out_dir):
    """Classify and evolve one point. Never raises on numerical trouble."""
    row = dict(pt)
    cfg = _point_config(template, pt)
    try:
        validate_physics(cfg)
    except ValidationError as exc:
        row.update(status="invalid", error=str(exc))
        return row
    sub = Path(out_dir) / "points" / _slug(pt["key"])
    try:
        code, res = cmd_dichotomy(cfg, sub)
    except FinlsError as exc:
        row.update(status="numerical_failure", error=str(exc))
        return row
    cls = res["classification"]
    row.update(
        status="ok" if code == EXIT_OK else "numerical_failure",
        predicted=res["predicted"],
        observed=res.get("observed"),
        verdict=res.get("verdict"),
        ME=cls["ME"],
        MG=cls["MG"],
        virial=cls["virial"],
        final_time=res.get("final_time"),
        mass_drift=res.get("mass_drift"),
        energy_drift=res.get("energy_drift"),
    )
    return row


def _slug(key):
    return key.replace(",", "_").replace("=", "")


def run_sweep(spec, out_dir, workers=None, resume=None, on_point=None):
    """Run every point not already journaled. Returns (exit_code, rows)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    workers = workers or spec.workers
    resume = spec.resume if resume is None else resume
    spec_hash = config_hash(spec)
    journal = Journal(out / "sweep_journal.jsonl")
    if resume:
        done = journal.load()
        stale = [k for k, e in done.items() if e.get("spec_hash") != spec_hash]
        if stale:
            raise ValidationError("journal was written by a different sweep specification")
    else:
        if journal.path.exists():
            journal.path.unlink()
        done = {}

    points = sweep_points(spec)
    todo = [pt for pt in points if pt["key"] not in done]

    def record(row):
        row["spec_hash"] = spec_hash
        journal.append(row)
        done[row["key"]] = row
        if on_point is not None:
            on_point(row)

    if workers == 1:
        for pt in todo:
            record(run_point(spec.template, pt, out))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futs = [pool.submit(run_point, spec.template, pt, out) for pt in todo]
            for fut in as_completed(futs):
                record(fut.result())

    rows = [done[pt["key"]] for pt in points]
    write_csv(out / "sweep_results.csv", RESULT_COLUMNS, [[r.get(c) for c in RESULT_COLUMNS] for r in rows])
    failed = [r["key"] for r in rows if r.get("status") != "ok"]
    disagree = [r["key"] for r in rows if r.get("verdict") == "DISAGREE"]
    summary = {
        "points": len(rows),
        "failed": failed,
        "disagreements": disagree,
        "agreements": sum(r.get("verdict") == "AGREE" for r in rows),
        "indeterminate": sum(r.get("predicted") == "indeterminate" for r in rows),
    }
    write_manifest(out / "sweep_manifest.json", "sweep", spec_hash, {"classifier_band": 1e-6}, summary,
                   ["sweep_results.csv", "sweep_journal.jsonl"])
    return (EXIT_NUMERICAL if failed else EXIT_OK), rows
