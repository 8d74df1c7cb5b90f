import math
import os
import subprocess
import sys

import numpy as np
import pytest

from finls.dynamics import (
    EvolveControls,
    Outcome,
    adapt_dt,
    dispersive_decay_check,
    evolve,
    scattering_monitor,
    strang_step,
)
from finls.errors import DomainError, InsufficientDataError, NumericalFailure, ValidationError, WindowTooLongError
from finls.ground_state import solve_ground_state
from finls.model import ModelParams, WeightField, mass
from finls.spectral import Field, Grid, free_propagator, l2_norm

from .conftest import gaussian

G = Grid(2, 64, 8.0)
P = ModelParams(2, 0.8, 0.4, 3.0)
W = WeightField.build(G, P.b)


def quiet(**kw):
    base = dict(dt=1e-2, t_end=0.2, snapshot_stride=5, boundary_tol=1e9, scattering_samples=0)
    base.update(kw)
    return EvolveControls(**base)


@pytest.mark.parametrize(
    "kw",
    [dict(dt=0.0), dict(dt=1e-3, dt_floor=1e-2), dict(t_end=0.0), dict(gradient_cap=1.0),
     dict(snapshot_stride=0), dict(boundary_reference="relative"), dict(scattering_samples=-1)],
)
def test_controls_validation(kw):
    with pytest.raises(ValidationError):
        EvolveControls(**kw)


def test_default_floor_and_sample_times():
    c = EvolveControls(dt=1e-3, t_end=3.0, scattering_samples=4)
    assert c.dt_floor == 1e-3 / 1024
    assert np.allclose(c.sample_times, (2.0, 7 / 3, 8 / 3, 3.0), rtol=0, atol=1e-15)
    assert c.sample_times[-1] == 3.0


def test_zero_data_stays_zero():
    tr = evolve(Field(G, np.zeros(G.shape)), P, quiet(), weight=W)
    assert tr.outcome is Outcome.COMPLETED
    assert np.all(tr.final_state.values == 0)
    assert all(r.mass == 0 and r.energy == 0 for r in tr.records)


def test_small_data_follow_the_free_flow():
    u = gaussian(G, 1.0) * 1e-6
    tr = evolve(u, P, quiet(), weight=W)
    free = free_propagator(u, 0.2, P.s)
    assert l2_norm(tr.final_state - free) < 1e-15 * l2_norm(u) + 1e-18


def test_strang_step_conserves_mass_and_checks_input():
    u = gaussian(G, 1.0, kick=[0.5, 0.0], amp=1.5)
    v = strang_step(u, 1e-2, P, W)
    assert math.isclose(mass(v), mass(u), rel_tol=1e-13)
    with pytest.raises(DomainError):
        strang_step(u, 0.0, P, W)
    with pytest.raises(NumericalFailure):
        strang_step(Field(G, np.full(G.shape, np.nan)), 1e-2, P, W)


def test_evolve_matches_repeated_strang_steps():
    u = gaussian(G, 1.0, amp=1.2)
    tr = evolve(u, P, quiet(t_end=0.1), weight=W)
    v = u
    for _ in range(10):
        v = strang_step(v, 1e-2, P, W)
    assert np.max(np.abs(tr.final_state.values - v.values)) < 1e-12


def test_second_order_in_time():
    u = gaussian(G, 1.0, amp=1.5, kick=[0.3, 0.0])
    ref = evolve(u, P, quiet(dt=1.25e-3, t_end=0.4), weight=W).final_state
    errs = [l2_norm(evolve(u, P, quiet(dt=dt, t_end=0.4), weight=W).final_state - ref) for dt in (2e-2, 1e-2)]
    assert 3.5 < errs[0] / errs[1] < 4.5


def test_time_reversal_symmetry():
    # conj o flow(T) o conj o flow(T) is the identity for a symmetric splitting
    u = gaussian(G, 1.0, amp=1.3, kick=[0.4, -0.2])
    a = evolve(u, P, quiet(t_end=0.3), weight=W).final_state.conj()
    back = evolve(a, P, quiet(t_end=0.3), weight=W).final_state.conj()
    assert np.max(np.abs(back.values - u.values)) < 1e-12


def test_deterministic_bitwise():
    u = gaussian(G, 1.0, amp=1.3)
    a = evolve(u, P, quiet(), weight=W)
    b = evolve(u, P, quiet(), weight=W)
    assert a.final_state.values.tobytes() == b.final_state.values.tobytes()
    assert [r.energy for r in a.records] == [r.energy for r in b.records]


def test_lands_on_targets_and_snapshots():
    c = quiet(dt=0.03, t_end=1.0, scattering_samples=3)
    tr = evolve(gaussian(G, 1.0), P, c, weight=W)
    assert tr.final_time == 1.0
    assert sorted(tr.snapshots) == list(c.sample_times)
    assert [r.t for r in tr.records][-1] == 1.0


def test_sink_receives_every_record():
    seen = []
    tr = evolve(gaussian(G, 1.0), P, quiet(), weight=W, sink=seen.append)
    assert seen == tr.records


def test_boundary_contamination_detected():
    u = gaussian(G, 0.5, center=[6.0, 0.0], kick=[3.0, 0.0])
    tr = evolve(u, P, quiet(t_end=1.0, boundary_tol=1e-6), weight=W)
    assert tr.outcome is Outcome.BOUNDARY
    rel = evolve(u, P, quiet(t_end=1.0, boundary_tol=1e-6, boundary_reference="initial"), weight=W)
    assert rel.records[0].boundary_tail > 0


def test_blow_up_detection_needs_floor_and_growth():
    g = Grid(2, 64, 4.0)
    gs = solve_ground_state(P, g)
    c = quiet(dt=0.02, t_end=1.0, adaptive=True, dt_floor=0.02 / 64, gradient_cap=3.0)
    tr = evolve(gs.Q * 1.5, P, c, weight=gs.weight)
    assert tr.outcome is Outcome.BLOW_UP
    assert tr.dt_history[-1][1] == c.dt_floor
    assert math.sqrt(tr.records[-1].kinetic / tr.records[0].kinetic) >= 3.0
    rep = scattering_monitor(tr)
    assert not rep.applicable and not rep.converged


def test_adapt_dt_law():
    u = gaussian(G, 1.0, amp=2.0)
    c = EvolveControls(dt=1e-2)
    a = 4.0 * W.max_off_origin
    assert math.isclose(adapt_dt(u, c, P, W), 1e-2 / (1 + a), rel_tol=1e-12)
    huge = u * 1e4
    assert adapt_dt(huge, c, P, W) == c.dt_floor


def test_scattering_monitor_requires_snapshots():
    tr = evolve(gaussian(G, 1.0), P, quiet(scattering_samples=2), weight=W)
    with pytest.raises(InsufficientDataError):
        scattering_monitor(tr, K=5)


def test_scattering_monitor_on_free_flow():
    # a tiny solution is a free wave: all profiles coincide
    tr = evolve(gaussian(G, 1.0) * 1e-6, P, quiet(t_end=0.6, scattering_samples=4), weight=W)
    rep = scattering_monitor(tr)
    assert rep.converged and rep.cauchy_tail < 1e-18
    assert tr.scattering_profile is not None


def test_dispersive_decay_short_window():
    g = Grid(2, 256, 32.0)
    phi = gaussian(g, 1.0)
    fits = dispersive_decay_check(phi, P, [1.0, 1.5, 2.0, 3.0], boundary_tol=1e-3)
    slopes = {f.r: f.slope for f in fits}
    assert abs(slopes[2.0]) < 1e-10  # unitary
    assert slopes[math.inf] < 0
    with pytest.raises(WindowTooLongError):
        dispersive_decay_check(phi, P, [1.0, 50.0, 100.0], boundary_tol=1e-8)
    with pytest.raises(InsufficientDataError):
        dispersive_decay_check(phi, P, [1.0, 2.0])


SNIPPET = """
import sys
import numpy as np
from finls import _kernels
from finls.dynamics import EvolveControls, evolve
from finls.model import ModelParams, WeightField
from finls.spectral import Field, Grid
g = Grid(2, 64, 8.0)
P = ModelParams(2, 0.8, 0.4, 3.0)
u = Field(g, 1.3 * np.exp(-g.radius**2 / 2 + 0.3j * g.coords[0]))
tr = evolve(u, P, EvolveControls(dt=1e-2, t_end=0.2, boundary_tol=1e9, scattering_samples=0),
            weight=WeightField.build(g, P.b))
np.save(sys.argv[1], tr.final_state.values)
print(_kernels.BACKEND)
"""


def test_backends_give_same_trajectory(tmp_path):
    out = {}
    for flag in ("0", "1"):
        path = tmp_path / f"u{flag}.npy"
        env = dict(os.environ, FINLS_DISABLE_NUMBA=flag)
        res = subprocess.run([sys.executable, "-c", SNIPPET, str(path)], env=env, capture_output=True,
                             text=True, check=True)
        out[res.stdout.strip()] = np.load(path)
    assert "numpy" in out
    if "numba" in out:
        assert np.max(np.abs(out["numba"] - out["numpy"])) < 1e-12
