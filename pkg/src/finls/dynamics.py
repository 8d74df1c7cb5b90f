"""Strang-split time integration with conservation monitoring, blow-up
detection and a scattering monitor.

One step of size dt is  L(dt/2) o N(dt) o L(dt/2)  with the exact linear flow
L(t) = exp(-i t D^{2s}) and the exact nonlinear flow
N(t) u = u exp(i t sign w |u|^{p-1}), which keeps |u| pointwise. Consecutive
half linear steps are merged, so the loop costs two FFTs per step; the state
is synchronized only when a record, snapshot or the final state is needed.
"""

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import _kernels
from .diagnostics import DiagnosticsContext, measure
from .errors import (
    DomainError,
    InsufficientDataError,
    NumericalFailure,
    ValidationError,
    WindowTooLongError,
)
from .model import WeightField
from .spectral import Field, dealias_mask, fft, free_propagator, ifft, power_symbol

__all__ = [
    "EvolveControls",
    "Outcome",
    "TrajectoryResult",
    "strang_step",
    "adapt_dt",
    "evolve",
    "scattering_monitor",
    "ScatteringReport",
    "dispersive_decay_check",
    "DecayFit",
]


@dataclass(frozen=True)
class EvolveControls:
    dt: float = 1e-3
    t_end: float = 1.0
    snapshot_stride: int = 10
    dt_floor: float | None = None  # None -> dt / 2**10
    gradient_cap: float = 10.0
    dealias: bool = False
    adaptive: bool = False
    boundary_tol: float = 1e-6
    boundary_reference: str = "absolute"  # or "initial": tol is added to the initial tail
    scattering_samples: int = 6
    max_steps: int = 50_000_000

    def __post_init__(self):
        if self.dt_floor is None:
            object.__setattr__(self, "dt_floor", self.dt / 2**10)
        if not self.dt > self.dt_floor > 0:
            raise ValidationError(f"need dt > dt_floor > 0, got dt={self.dt}, dt_floor={self.dt_floor}")
        if not self.t_end > 0:
            raise ValidationError(f"t_end must be positive, got {self.t_end}")
        if not self.gradient_cap > 1:
            raise ValidationError(f"gradient_cap must exceed 1, got {self.gradient_cap}")
        if self.snapshot_stride < 1:
            raise ValidationError("snapshot_stride must be >= 1")
        if self.boundary_reference not in ("absolute", "initial"):
            raise ValidationError("boundary_reference must be 'absolute' or 'initial'")
        if self.scattering_samples < 0:
            raise ValidationError("scattering_samples must be >= 0")

    @property
    def sample_times(self):
        """K equispaced times over the last third of the run (scattering monitor)."""
        K = self.scattering_samples
        if K == 0:
            return ()
        T = self.t_end
        return tuple(float(x) for x in np.linspace(2 * T / 3, T, K))


class Outcome(str, Enum):
    COMPLETED = "completed"
    BLOW_UP = "blow_up_detected"
    BOUNDARY = "boundary_contaminated"


@dataclass
class TrajectoryResult:
    records: list
    outcome: Outcome
    final_state: Field
    params: object
    controls: EvolveControls
    snapshots: dict = field(default_factory=dict)
    scattering_profile: Field | None = None
    dt_history: list = field(default_factory=list)
    steps: int = 0
    final_time: float = 0.0
    flags: list = field(default_factory=list)

    @property
    def mass_drift(self):
        m = np.array([r.mass for r in self.records])
        return float(np.max(np.abs(m - m[0])) / m[0]) if m[0] > 0 else 0.0

    @property
    def energy_drift(self):
        e = np.array([r.energy for r in self.records])
        return float(np.max(np.abs(e - e[0])) / abs(e[0])) if e[0] != 0 else 0.0

    @property
    def times(self):
        return np.array([r.t for r in self.records])

    def series(self, key):
        return np.array([getattr(r, key) for r in self.records])


# ---------------------------------------------------------------- stepping


def _check_finite(v, t):
    if not np.all(np.isfinite(v)):
        raise NumericalFailure(f"non-finite state after t={t}", last_valid_time=t)


def strang_step(u, dt, params, w, dealias=False, t=0.0):
    """One L(dt/2) N(dt) L(dt/2) step of the equation."""
    if not u.is_physical:
        raise DomainError("strang_step expects a physical-space field")
    if not dt > 0:
        raise DomainError(f"dt must be positive, got {dt}")
    _check_finite(u.values, t)
    g = u.grid
    half = np.exp(-0.5j * dt * power_symbol(g, 2 * params.s))
    v = ifft(half * fft(u.values))
    v = _kernels.nonlinear_phase(v, w.values, dt * params.sign_int, params.p - 1)
    V = fft(v)
    if dealias:
        V = V * dealias_mask(g)
    out = ifft(half * V)
    _check_finite(out, t)
    return u.with_values(out)


def _amplitude_load(sup, params, w):
    # weight maximum away from the origin cell
    return sup ** (params.p - 1) * w.max_off_origin


def adapt_dt(u, controls, params, w):
    """dt = base / (1 + a),  a = ||u||_inf^{p-1} max_{x != 0} w, clamped to [dt_floor, base]."""
    sup = _kernels.abs_max(u.values if isinstance(u, Field) else u)
    dt = controls.dt / (1.0 + _amplitude_load(sup, params, w))
    return float(min(controls.dt, max(controls.dt_floor, dt)))


def evolve(u0, params, controls, weight=None, ground=None, radii=(), virial_radius=None, sink=None):
    """Integrate from t = 0 to controls.t_end (or until a monitor fires).

    ``sink``, if given, receives every DiagnosticsRecord as it is produced.
    """
    g = u0.grid
    _check_finite(u0.values, 0.0)
    w = weight if weight is not None else WeightField.build(g, params.b)
    ctx = DiagnosticsContext(params, w, tuple(radii), virial_radius, ground)
    L = power_symbol(g, 2 * params.s)
    mask = dealias_mask(g) if controls.dealias else None
    coef = params.sign_int
    expo = params.p - 1
    T = controls.t_end
    tol_t = 1e-12 * max(T, 1.0)

    targets = sorted(set(controls.sample_times) | {T})
    snapshots = {}
    records = []
    dt_hist = []

    def emit(rec):
        records.append(rec)
        if sink is not None:
            sink(rec)

    u = np.array(u0.values, dtype=complex)
    rec0 = measure(u0, 0.0, ctx, controls.dt)
    emit(rec0)
    K0 = math.sqrt(rec0.kinetic)
    tail0 = rec0.boundary_tail
    boundary_limit = controls.boundary_tol + (tail0 if controls.boundary_reference == "initial" else 0.0)

    exp_cache = {}

    def prop(tau):
        key = round(tau, 15)
        e = exp_cache.get(key)
        if e is None:
            if len(exp_cache) > 8:
                exp_cache.clear()
            e = np.exp(-1j * tau * L)
            exp_cache[key] = e
        return e

    def sync(V, pending):
        return ifft(V * prop(pending))

    # v holds the state after the nonlinear substep, still owed a half linear step
    t = 0.0
    step = 0
    outcome = Outcome.COMPLETED
    pending = 0.0  # linear time owed to v
    V = fft(u)
    v = u
    ti = 0
    if 0.0 in controls.sample_times:
        snapshots[0.0] = u0
        ti = 0
    while True:
        # next target
        while ti < len(targets) and targets[ti] <= t + tol_t:
            ti += 1
        if ti >= len(targets):
            break
        if step >= controls.max_steps:
            raise NumericalFailure(f"max_steps={controls.max_steps} reached at t={t}", last_valid_time=t)
        if controls.adaptive:
            sup = _kernels.abs_max(v)
            dt = controls.dt / (1.0 + _amplitude_load(sup, params, w))
            at_floor = dt <= controls.dt_floor
            dt = min(controls.dt, max(controls.dt_floor, dt))
        else:
            dt = controls.dt
            at_floor = False
        target = targets[ti]
        if t + dt > target - tol_t:
            dt = target - t
        # merged linear step: owed half of previous + half of this one
        V = V * prop(pending + dt / 2)
        v = ifft(V)
        v = _kernels.nonlinear_phase(v, w.values, coef * dt, expo)
        V = fft(v)
        if mask is not None:
            V = V * mask
        pending = dt / 2
        t = target if abs(t + dt - target) <= tol_t else t + dt
        step += 1
        dt_hist.append((t, dt))
        if not np.isfinite(_kernels.abs_max(v)):
            raise NumericalFailure(f"non-finite state at step {step} (t={t})", last_valid_time=t - dt)

        hit_target = abs(t - target) <= tol_t
        need_record = step % controls.snapshot_stride == 0 or hit_target
        blow = False
        if at_floor:
            Kt = math.sqrt(np.sum(L * np.abs(V) ** 2) * g.cell_volume / g.size)
            blow = Kt >= controls.gradient_cap * K0
        if need_record or blow:
            uf = Field(g, sync(V, pending))
            rec = measure(uf, t, ctx, dt)
            emit(rec)
            if hit_target and any(abs(t - s) <= tol_t for s in controls.sample_times):
                snapshots[t] = uf
            if blow:
                outcome = Outcome.BLOW_UP
                break
            if rec.boundary_tail > boundary_limit:
                outcome = Outcome.BOUNDARY
                break

    final = Field(g, sync(V, pending))
    if not records or records[-1].t != t:
        emit(measure(final, t, ctx, dt_hist[-1][1] if dt_hist else controls.dt))
    res = TrajectoryResult(
        records=records,
        outcome=outcome,
        final_state=final,
        params=params,
        controls=controls,
        snapshots=snapshots,
        dt_history=dt_hist,
        steps=step,
        final_time=t,
    )
    if outcome is Outcome.COMPLETED:
        if res.mass_drift > 1e-10:
            res.flags.append(f"mass drift {res.mass_drift:.2e} exceeds 1e-10")
        if res.energy_drift > 1e-6:
            res.flags.append(f"energy drift {res.energy_drift:.2e} exceeds 1e-6")
    return res


# ------------------------------------------------------------- scattering


@dataclass
class ScatteringReport:
    converged: bool
    profile: Field | None
    cauchy_tail: float
    cauchy_sequence: list
    times: list
    local_mass: dict
    applicable: bool = True

    def to_dict(self):
        return {
            "converged": self.converged,
            "cauchy_tail": self.cauchy_tail,
            "cauchy_sequence": self.cauchy_sequence,
            "times": self.times,
            "local_mass": {f"{k:g}": v for k, v in self.local_mass.items()},
            "applicable": self.applicable,
        }


def _hs_norm(F, s, grid):
    """||.||_{H^s} of DFT coefficients F."""
    sym = 1.0 + power_symbol(grid, 2 * s)
    return math.sqrt(np.sum(sym * np.abs(F) ** 2) * grid.cell_volume / grid.size)


def scattering_monitor(traj, tol=1e-2, K=None):
    """Back-propagate the last K snapshots with exp(+i t D^{2s}) and test the
    H^s Cauchy differences of consecutive profiles."""
    if traj.outcome is not Outcome.COMPLETED:
        return ScatteringReport(False, None, math.inf, [], [], {}, applicable=False)
    K = K or traj.controls.scattering_samples
    times = sorted(traj.snapshots)
    if len(times) < K or K < 2:
        raise InsufficientDataError(f"need {K} snapshots, trajectory has {len(times)}")
    times = times[-K:]
    s = traj.params.s
    g = traj.final_state.grid
    L = power_symbol(g, 2 * s)
    profiles = [np.exp(1j * t * L) * fft(traj.snapshots[t].values) for t in times]
    diffs = [_hs_norm(b - a, s, g) for a, b in zip(profiles[:-1], profiles[1:])]
    monotone = all(d2 <= d1 for d1, d2 in zip(diffs[:-1], diffs[1:]))
    tail = diffs[-1]
    lm = {}
    for rec in traj.records:
        if abs(rec.t - times[-1]) < 1e-12 * max(1, times[-1]):
            lm = dict(rec.local_mass)
    profile = Field(g, ifft(profiles[-1]))
    traj.scattering_profile = profile
    return ScatteringReport(bool(monotone and tail <= tol), profile, float(tail), diffs, times, lm)


# --------------------------------------------------------- dispersive decay


@dataclass
class DecayFit:
    r: float
    slope: float
    predicted: float
    times: list
    norms: list

    @property
    def relative_error(self):
        if self.predicted == 0:
            return abs(self.slope)
        return abs(self.slope - self.predicted) / abs(self.predicted)


def _lr_norm(v, r, grid):
    a = np.abs(v)
    if math.isinf(r):
        return float(a.max())
    return float((grid.cell_volume * np.sum(a**r)) ** (1 / r))


def dispersive_decay_check(phi, params, times, exponents=(2.0, 4.0, math.inf), boundary_tol=1e-8,
                           band_fraction=1 / 16):
    """Fit log ||exp(-i t D^{2s}) phi||_{L^r} against log t.

    Raises WindowTooLongError when the free wave reaches the box faces inside
    the window (largest boundary value above ``boundary_tol`` times sup|phi|).
    """
    from .diagnostics import boundary_band, decay_slope

    g = phi.grid
    times = np.asarray(sorted(times), dtype=float)
    if times.size < 3 or times[0] <= 0:
        raise InsufficientDataError("need at least three positive times")
    band = boundary_band(g, band_fraction)
    scale = float(np.max(np.abs(phi.values)))
    states = []
    for t in times:
        v = free_propagator(phi, t, params.s).values
        tail = float(np.max(np.abs(v[band])))
        if tail > boundary_tol * scale:
            raise WindowTooLongError(
                f"boundary value {tail:.2e} exceeds {boundary_tol:.0e} x sup|phi| at t={t:g}"
            )
        states.append(v)
    N = g.dim
    fits = []
    for r in exponents:
        norms = [_lr_norm(v, r, g) for v in states]
        pred = -N * (0.5 - (0 if math.isinf(r) else 1 / r))
        fits.append(DecayFit(float(r), decay_slope(times, norms), pred, times.tolist(), norms))
    return fits
