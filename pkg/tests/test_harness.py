import csv
import json
import math

import numpy as np
import pytest

from finls import cli
from finls.errors import ValidationError
from finls.harness.config import config_hash, load_config, load_sweep
from finls.harness.io import CsvStream, Journal, format_cell, read_snapshot, write_csv, write_snapshot
from finls.harness.sweep import run_sweep, sweep_points
from finls.spectral import Field, Grid

SMALL = {
    "params": {"dim": 2, "s": 0.8, "b": 0.4, "p": 3.0, "sign": "focusing"},
    "grid": {"points_per_axis": 64, "half_width": 8.0},
    "controls": {"dt": 0.01, "t_end": 0.1, "snapshot_stride": 5, "boundary_tol": 1e9, "scattering_samples": 2},
    "ground": {"residual_target": 1e-6},
    "initial_data": {"kind": "ground_scaled", "c": 0.8},
    "verify": {"corpus_size": 8, "sobolev_corpus_size": 5},
}


def write_cfg(tmp_path, data, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return path


def test_strict_config_rejects_unknown_keys(tmp_path):
    bad = dict(SMALL, grid={"points_per_axis": 64, "half_width": 8.0, "hw": 1})
    with pytest.raises(ValidationError, match="hw"):
        load_config(write_cfg(tmp_path, bad), env={})


def test_config_rejects_bad_json_and_missing_file(tmp_path):
    p = tmp_path / "x.json"
    p.write_text("{'single': 1}")
    with pytest.raises(ValidationError):
        load_config(p, env={})
    with pytest.raises(ValidationError):
        load_config(tmp_path / "missing.json", env={})


def test_config_rejects_inadmissible_physics(tmp_path):
    bad = dict(SMALL, params=dict(SMALL["params"], p=1.5))
    with pytest.raises(ValidationError):
        load_config(write_cfg(tmp_path, bad), env={})


def test_env_overrides_only_output_dir_and_workers(tmp_path):
    env = {"FINLS_OUTPUT_DIR": str(tmp_path / "o"), "FINLS_WORKERS": "3", "FINLS_DT": "5"}
    cfg = load_config(write_cfg(tmp_path, SMALL), env=env)
    assert cfg.output_dir == str(tmp_path / "o")
    assert cfg.controls.dt == 0.01
    spec = load_sweep(write_cfg(tmp_path, {"axes": {"c": [0.5]}, "template": SMALL}, "s.json"), env=env)
    assert spec.workers == 3 and spec.template.output_dir == str(tmp_path / "o")
    with pytest.raises(ValidationError):
        load_sweep(tmp_path / "s.json", env={"FINLS_WORKERS": "many"})


def test_config_hash_is_canonical(tmp_path):
    a = load_config(write_cfg(tmp_path, SMALL), env={})
    reordered = {k: SMALL[k] for k in reversed(list(SMALL))}
    b = load_config(write_cfg(tmp_path, reordered, "b.json"), env={})
    assert config_hash(a) == config_hash(b)
    c = load_config(write_cfg(tmp_path, dict(SMALL, seed=1), "c.json"), env={})
    assert config_hash(c) != config_hash(a)


def test_snapshot_roundtrip_and_layout(tmp_path):
    g = Grid(2, 64, 8.0)
    rng = np.random.default_rng(0)
    u = Field(g, rng.normal(size=g.shape) + 1j * rng.normal(size=g.shape))
    path = tmp_path / "u.snap"
    write_snapshot(path, u, time=1.5)
    v, header = read_snapshot(path)
    assert v.grid == g and header["time"] == 1.5
    assert v.values.tobytes() == u.values.tobytes()
    raw = path.read_bytes()
    body = raw[raw.index(b"\n") + 1:]
    pairs = np.frombuffer(body, dtype="<f8")
    assert pairs[0] == u.values[0, 0].real and pairs[1] == u.values[0, 0].imag
    assert pairs[2] == u.values[0, 1].real  # row-major
    path.write_bytes(raw[:-16])
    with pytest.raises(ValidationError):
        read_snapshot(path)


def test_csv_cells(tmp_path):
    assert format_cell(math.nan) == ""
    assert format_cell(None) == ""
    assert float(format_cell(0.1 + 0.2)) == 0.1 + 0.2
    write_csv(tmp_path / "t.csv", ["a", "b"], [[1, math.nan], [2.5, "x"]])
    assert (tmp_path / "t.csv").read_text() == "a,b\n1,\n2.5,x\n"
    with CsvStream(tmp_path / "s.csv", ["t"]) as cs:
        for i in range(100):
            cs.put([i * 0.5])
    rows = list(csv.reader(open(tmp_path / "s.csv")))
    assert len(rows) == 101 and rows[-1] == ["49.5"]


def test_journal_ignores_torn_line(tmp_path):
    j = Journal(tmp_path / "j.jsonl")
    j.append({"key": "a", "x": 1.0})
    j.append({"key": "b", "x": math.nan})
    with open(j.path, "a") as fh:
        fh.write('{"key": "c", "x"')
    done = j.load()
    assert sorted(done) == ["a", "b"] and done["b"]["x"] is None


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_cli_exit_codes(tmp_path, capsys):
    bad = write_cfg(tmp_path, dict(SMALL, typo=1), "bad.json")
    assert cli.main(["evolve", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "ValidationError"
    blowing = dict(SMALL, controls=dict(SMALL["controls"], dt=10.0, t_end=20.0))
    blowing["initial_data"] = {"kind": "gaussian", "width": 0.3, "amplitude": 1e200}
    assert cli.main(["evolve", "--config", str(write_cfg(tmp_path, blowing, "nan.json")),
                     "--out", str(tmp_path / "n")]) == 3


def test_cli_ground_writes_artifacts(tmp_path):
    out = tmp_path / "g"
    code = cli.main(["ground", "--config", str(write_cfg(tmp_path, SMALL)), "--out", str(out)])
    assert code == 0
    man = json.loads((out / "ground_manifest.json").read_text())
    assert {"config_hash", "version", "tolerances", "results", "kernel_backend"} <= set(man)
    Q, header = read_snapshot(out / "ground_Q.snap")
    assert Q.grid == Grid(2, 64, 8.0)


def test_cli_evolve_is_deterministic(tmp_path):
    cfg = write_cfg(tmp_path, SMALL)
    for name in ("a", "b"):
        assert cli.main(["evolve", "--config", str(cfg), "--out", str(tmp_path / name)]) == 0
    for f in ("evolve_series.csv", "evolve_final.snap"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    ma = json.loads((tmp_path / "a" / "evolve_manifest.json").read_text())
    mb = json.loads((tmp_path / "b" / "evolve_manifest.json").read_text())
    ma.pop("created"), mb.pop("created")
    assert ma == mb


def test_verify_fault_injection(tmp_path):
    cfg = write_cfg(tmp_path, SMALL)
    assert cli.main(["ground", "--config", str(cfg), "--out", str(tmp_path / "g")]) == 0
    Q, _ = read_snapshot(tmp_path / "g" / "ground_Q.snap")
    write_snapshot(tmp_path / "bad.snap", Q * 1.1)
    broken = dict(SMALL, verify=dict(SMALL["verify"], ground_snapshot=str(tmp_path / "bad.snap")))
    code = cli.main(["verify", "--config", str(write_cfg(tmp_path, broken, "v.json")),
                     "--out", str(tmp_path / "v")])
    assert code == 4
    rep = json.loads((tmp_path / "v" / "verify_report.json").read_text())
    assert "pohozaev_kinetic" in rep["failed"] or "pohozaev_potential" in rep["failed"]


SWEEP = {"axes": {"s": [0.8], "b": [0.4], "p": [3.0], "c": [0.5, 0.8, 1.3]}, "template": SMALL}


def test_sweep_points_axis_order(tmp_path):
    spec = load_sweep(write_cfg(tmp_path, {"axes": {"s": [0.7, 0.8], "c": [0.5, 1.0]}, "template": SMALL}),
                      env={})
    pts = sweep_points(spec)
    assert [(p["s"], p["c"]) for p in pts] == [(0.7, 0.5), (0.7, 1.0), (0.8, 0.5), (0.8, 1.0)]
    assert all(p["b"] == 0.4 and p["p"] == 3.0 for p in pts)


def test_sweep_resume_matches_uninterrupted(tmp_path):
    spec = load_sweep(write_cfg(tmp_path, SWEEP), env={})
    code, full = run_sweep(spec, tmp_path / "full")
    assert len(full) == 3

    class Kill(Exception):
        pass

    def die_after_first(row):
        raise Kill

    with pytest.raises(Kill):
        run_sweep(spec, tmp_path / "part", on_point=die_after_first)
    assert len(Journal(tmp_path / "part" / "sweep_journal.jsonl").load()) == 1
    code2, resumed = run_sweep(spec, tmp_path / "part", resume=True)
    assert code2 == code
    assert (tmp_path / "part" / "sweep_results.csv").read_bytes() == \
        (tmp_path / "full" / "sweep_results.csv").read_bytes()


def test_sweep_resume_rejects_other_spec(tmp_path):
    spec = load_sweep(write_cfg(tmp_path, SWEEP), env={})
    run_sweep(spec, tmp_path / "o")
    other = load_sweep(write_cfg(tmp_path, dict(SWEEP, axes=dict(SWEEP["axes"], c=[0.6])), "o.json"), env={})
    with pytest.raises(ValidationError):
        run_sweep(other, tmp_path / "o", resume=True)


def test_sweep_marks_invalid_points(tmp_path):
    spec = load_sweep(write_cfg(tmp_path, dict(SWEEP, axes={"p": [1.2, 3.0], "c": [0.5]})), env={})
    code, rows = run_sweep(spec, tmp_path / "o")
    assert [r["status"] for r in rows] == ["invalid", "ok"]
    assert code == 3
