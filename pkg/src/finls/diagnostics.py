"""Localized virial, resolvent (Balakrishnan) quadrature, Morawetz and
local-decay diagnostics, plus the per-sample DiagnosticsRecord.

The m-integrals of the form  int_0^inf m^s G(m) dm  are evaluated after the
substitution m = e^y with Gauss-Legendre nodes on [y_lo, y_hi]. For a single
Fourier mode the integrand of the Balakrishnan formula is

    c_s^2 e^{(s+1)y} xi^2 / (e^y + xi^2)^2,

which decays like e^{(s+1)y} below and e^{-(1-s)y} above. Each end of the
interval is placed where the corresponding analytic tail, relative to the
mode's total s xi^{2s}, drops below ``tail_tol`` for the worst mode on the
lattice (smallest nonzero |xi| for the lower end, the corner |xi| for the
upper end). The upper tail decays slowly, so the interval is lopsided.
"""

import csv
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from . import _kernels
from .cutoffs import CutoffKind, CutoffSpec
from .errors import DomainError, InsufficientDataError, QuadratureError
from .model import kinetic, mass, me_mg, potential
from .spectral import (
    derivative_symbols,
    fft,
    gradient,
    ifft,
    resolvent_constant,
    sobolev_seminorm,
)

__all__ = [
    "MQuadrature",
    "balakrishnan_identity",
    "localized_virial",
    "virial_rhs",
    "VirialBreakdown",
    "localized_energy_inequality",
    "localized_energy_sweep",
    "local_mass",
    "local_potential",
    "boundary_band",
    "boundary_tail",
    "DiagnosticsContext",
    "DiagnosticsRecord",
    "measure",
    "morawetz_spacetime",
    "morawetz_bound",
    "local_decay_scan",
    "radial_sobolev_check",
    "write_breakdown_csv",
]


# ------------------------------------------------------------ m-quadrature


@dataclass(frozen=True)
class MQuadrature:
    nodes: int = 128
    tail_tol: float = 1e-6
    y_lo: float | None = None
    y_hi: float | None = None

    def tail_estimate(self, grid, s, y_lo, y_hi):
        """Worst relative single-mode tail mass outside [y_lo, y_hi]."""
        c2 = resolvent_constant(s) ** 2
        xi_min = np.pi / grid.half_width
        xi_max = np.pi / grid.spacing * math.sqrt(grid.dim)
        lower = c2 * math.exp((s + 1) * y_lo) / ((s + 1) * s * xi_min ** (2 + 2 * s))
        upper = c2 * xi_max ** (2 - 2 * s) * math.exp((s - 1) * y_hi) / ((1 - s) * s)
        return max(lower, upper)

    def interval(self, grid, s):
        c2 = resolvent_constant(s) ** 2
        tol = self.tail_tol
        xi_min = np.pi / grid.half_width
        xi_max = np.pi / grid.spacing * math.sqrt(grid.dim)
        y_lo = self.y_lo
        if y_lo is None:
            y_lo = math.log(tol * (s + 1) * s * xi_min ** (2 + 2 * s) / c2) / (s + 1)
        y_hi = self.y_hi
        if y_hi is None:
            y_hi = math.log(tol * (1 - s) * s / (c2 * xi_max ** (2 - 2 * s))) / (s - 1)
        if not y_hi > y_lo:
            raise QuadratureError(f"empty m-interval [{y_lo}, {y_hi}]")
        return y_lo, y_hi

    def rule(self, grid, s):
        """Return (m_j, W_j) with int_0^inf m^s G(m) dm ~ sum_j W_j G(m_j)."""
        if not 0 < s < 1:
            raise DomainError(f"s must lie in (0, 1), got {s}")
        y_lo, y_hi = self.interval(grid, s)
        tail = self.tail_estimate(grid, s, y_lo, y_hi)
        if tail > self.tail_tol * (1 + 1e-9):
            raise QuadratureError(
                f"m-quadrature tail estimate {tail:.3e} exceeds tolerance {self.tail_tol:.1e}"
            )
        t, wt = np.polynomial.legendre.leggauss(self.nodes)
        half = (y_hi - y_lo) / 2
        y = y_lo + half * (1 + t)
        m = np.exp(y)
        return m, wt * half * m ** (s + 1)

    def refined(self):
        return MQuadrature(2 * self.nodes, self.tail_tol, self.y_lo, self.y_hi)


# --------------------------------------------------------- Balakrishnan


def _parseval_scale(grid):
    return grid.cell_volume / grid.size


def balakrishnan_identity(u, s, quad=None):
    """Return (s ||D^s u||^2, int_0^inf m^s ||grad u_m||^2 dm)."""
    quad = quad or MQuadrature()
    g = u.grid
    lhs = s * sobolev_seminorm(u, s) ** 2
    m, W = quad.rule(g, s)
    k2 = g.freq_norm**2
    # Nyquist-free gradient symbol, matching the spectral gradient
    dk2 = sum(np.abs(d) ** 2 for d in derivative_symbols(g))
    dk2 = np.broadcast_to(dk2, g.shape)
    power = np.abs(fft(u.values)) ** 2 * _parseval_scale(g)
    c2 = resolvent_constant(s) ** 2
    rhs = 0.0
    for mj, Wj in zip(m, W):
        rhs += Wj * c2 * np.sum(dk2 * power / (mj + k2) ** 2)
    return float(lhs), float(rhs)


# ------------------------------------------------------- localized virial


def localized_virial(u, cutoff):
    """M_R[u] = 2 Im int conj(u) grad f_R . grad u."""
    if cutoff.kind is not CutoffKind.F_VIRIAL:
        raise DomainError("localized_virial needs an f_virial cutoff")
    g = u.grid
    grads = gradient(u)
    gf = cutoff.gradient(g)
    acc = sum(gf[k] * grads[k].values for k in range(g.dim))
    return float(2.0 * g.cell_volume * np.sum(np.imag(np.conj(u.values) * acc)))


@dataclass
class VirialBreakdown:
    kinetic_inner: float
    kinetic_outer: float
    bilaplacian: float
    potential_inner: float
    potential_outer: float
    weight_gradient: float

    @property
    def total(self):
        return (
            self.kinetic_inner
            + self.kinetic_outer
            + self.bilaplacian
            + self.potential_inner
            + self.potential_outer
            + self.weight_gradient
        )

    def as_dict(self):
        d = asdict(self)
        d["total"] = self.total
        return d


def virial_rhs(u, params, w, cutoff, quad=None):
    """d/dt M_R along the flow, term by term.

    Kinetic part: int_0^inf m^s int (4 Re(d_k conj(u_m) H_kl d_l u_m) - Delta^2 f_R |u_m|^2) dx dm,
    split at |x| = R (inside, H is the identity). Nonlinear part: the
    weighted potential terms, with the sign flipped for defocusing.
    """
    quad = quad or MQuadrature()
    g = u.grid
    N, s, b, p = g.dim, params.s, params.b, params.p
    R = cutoff.radius
    r = g.radius
    inner = r < R
    H = cutoff.hessian(g)
    bilap = cutoff.bilaplacian(g)
    bilap = bilap - bilap.mean()  # exact zero sum; the zero mode of u_m is 1/m-singular
    m, W = quad.rule(g, s)
    cs = resolvent_constant(s)
    k2 = g.freq_norm**2
    dsym = derivative_symbols(g)
    U = fft(u.values)
    hv = g.cell_volume
    kin_in = kin_out = bil = 0.0
    for mj, Wj in zip(m, W):
        res = cs * U / (mj + k2)
        um = ifft(res)
        du = [ifft(d * res) for d in dsym]
        grad2 = sum(np.abs(x) ** 2 for x in du)
        hq = np.zeros(g.shape)
        for k in range(N):
            for l in range(N):
                hq += H[k][l] * np.real(np.conj(du[k]) * du[l])
        kin_in += Wj * 4 * hv * np.sum(grad2[inner])
        kin_out += Wj * 4 * hv * np.sum(hq[~inner])
        bil -= Wj * hv * np.sum(bilap * np.abs(um) ** 2)

    dens = w.values * np.abs(u.values) ** (p + 1)
    lap = cutoff.laplacian(g)
    gf = cutoff.gradient(g)
    rr = np.where(r > 0, r, 1.0)
    radial = sum(gf[k] * g.coords[k] for k in range(N)) / rr**2
    B = params.exponents.B
    sgn = params.sign_int
    pot_in = -sgn * 4 * s * B / (p + 1) * hv * np.sum(dens[inner])
    pot_out = sgn * 2 * (p - 1) / (p + 1) * hv * np.sum(((N - lap) * dens)[~inner])
    wgrad = -sgn * 4 * b / (p + 1) * hv * np.sum((radial * dens)[~inner])
    return VirialBreakdown(
        float(kin_in), float(kin_out), float(bil), float(pot_in), float(pot_out), float(wgrad)
    )


def write_breakdown_csv(path, rows):
    """rows: iterable of (label, VirialBreakdown)."""
    cols = ["label", "kinetic_inner", "kinetic_outer", "bilaplacian", "potential_inner",
            "potential_outer", "weight_gradient", "total"]
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(cols)
        for label, br in rows:
            d = br.as_dict()
            wr.writerow([label] + [_csv_num(d[c]) for c in cols[1:]])


def _csv_num(x):
    return "" if x is None or (isinstance(x, float) and math.isnan(x)) else repr(float(x))


# ------------------------------------------------ localized energy inequality


def localized_energy_inequality(u, s, R, C=0.0):
    """Return (s||D^s(psi_R u)||^2, s||D^s u||^2, slack = rhs + C/R - lhs)."""
    psi = CutoffSpec(R, CutoffKind.PSI).psi(u.grid)
    lhs = s * sobolev_seminorm(u.with_values(psi * u.values), s) ** 2
    rhs = s * sobolev_seminorm(u, s) ** 2
    return float(lhs), float(rhs), float(rhs + C / R - lhs)


def localized_energy_sweep(u, s, radii):
    """Smallest O(1/R) constant on a sweep of radii, with the per-radius slacks.

    C = max_R R (lhs - rhs)_+, so every slack is >= 0 up to rounding; the
    excess times R (``excess_times_R``) is what must stay bounded as R grows.
    """
    radii = np.asarray(sorted(radii), dtype=float)
    vals = [localized_energy_inequality(u, s, R) for R in radii]
    excess = np.array([max(l - r, 0.0) for l, r, _ in vals])
    C = float(np.max(excess * radii))
    rows = []
    for R, (l, r, _), ex in zip(radii, vals, excess):
        rows.append({"R": float(R), "lhs": l, "rhs": r, "slack": r + C / R - l, "excess_times_R": ex * R})
    return {"C": C, "rows": rows}


# ------------------------------------------------------- local quantities


def local_mass(u, R):
    g = u.grid
    return float(g.cell_volume * np.sum(np.abs(u.values[g.radius < R]) ** 2))


def local_potential(u, w, p, R):
    g = u.grid
    sel = g.radius < R
    return float(g.cell_volume * np.sum(w.values[sel] * np.abs(u.values[sel]) ** (p + 1)))


def boundary_band(grid, fraction=1 / 16):
    """Mask of points within ``fraction`` of the box width from its faces."""
    L = grid.half_width
    d = 2 * L * fraction
    mask = np.zeros(grid.shape, dtype=bool)
    for x in grid.coords:
        mask |= (x < -L + d) | (x > L - d)
    return mask


def boundary_tail(u, band=None):
    band = boundary_band(u.grid) if band is None else band
    return _kernels.abs_max(u.values[band])


@dataclass
class DiagnosticsContext:
    params: object
    weight: object
    radii: tuple = ()
    virial_radius: float | None = None
    ground: object = None
    band_fraction: float = 1 / 16

    def __post_init__(self):
        g = self.weight.grid
        if self.virial_radius is None:
            self.virial_radius = g.half_width / 4
        if not self.radii:
            self.radii = (self.virial_radius,)
        self.radii = tuple(float(R) for R in self.radii)
        self._cutoff = CutoffSpec(self.virial_radius)
        self._band = boundary_band(g, self.band_fraction)
        self._masks = {R: g.radius < R for R in self.radii}


@dataclass
class DiagnosticsRecord:
    t: float
    dt: float
    mass: float
    energy: float
    kinetic: float
    potential: float
    virial: float
    M_R: float
    ME: float
    MG: float
    sup_norm: float
    boundary_tail: float
    local_mass: dict = field(default_factory=dict)
    local_potential: dict = field(default_factory=dict)

    COLUMNS = ("t", "dt", "mass", "energy", "kinetic", "potential", "virial", "M_R", "ME", "MG",
               "sup_norm", "boundary_tail")

    def row(self, radii):
        vals = [getattr(self, c) for c in self.COLUMNS]
        vals += [self.local_mass.get(R, math.nan) for R in radii]
        vals += [self.local_potential.get(R, math.nan) for R in radii]
        return vals

    @staticmethod
    def header(radii):
        return list(DiagnosticsRecord.COLUMNS) + [f"local_mass_R{R:g}" for R in radii] + [
            f"local_potential_R{R:g}" for R in radii
        ]


def measure(u, t, ctx, dt=math.nan):
    """Evaluate every monitored functional of ``u`` at time ``t``."""
    params, w = ctx.params, ctx.weight
    p = params.p
    g = u.grid
    hv = g.cell_volume
    K = kinetic(u, params.s)
    P = potential(u, w, p)
    Mu = mass(u)
    E = K - params.sign_int * 2.0 / (p + 1) * P
    I = K - params.exponents.B / (p + 1) * P
    if ctx.ground is not None:
        ME, MG = me_mg(u, ctx.ground, params, w)
    else:
        ME = MG = math.nan
    absu2 = np.abs(u.values) ** 2
    dens = w.values * np.abs(u.values) ** (p + 1)
    lm = {R: float(hv * np.sum(absu2[m])) for R, m in ctx._masks.items()}
    lp = {R: float(hv * np.sum(dens[m])) for R, m in ctx._masks.items()}
    return DiagnosticsRecord(
        t=float(t),
        dt=float(dt),
        mass=Mu,
        energy=float(E),
        kinetic=K,
        potential=P,
        virial=float(I),
        M_R=localized_virial(u, ctx._cutoff),
        ME=ME,
        MG=MG,
        sup_norm=_kernels.abs_max(u.values),
        boundary_tail=float(np.max(np.abs(u.values[ctx._band]))) if ctx._band.any() else 0.0,
        local_mass=lm,
        local_potential=lp,
    )


# ------------------------------------------------- space-time diagnostics


def _series(records, key, R):
    t = np.array([r.t for r in records])
    v = np.array([getattr(r, key)[R] for r in records])
    return t, v


def morawetz_spacetime(records, R, b):
    """Return (int_0^T local_potential(R) dt, that integral / (R + T R^{-b}))."""
    if len(records) < 2:
        raise InsufficientDataError("need at least two records")
    t, v = _series(records, "local_potential", R)
    integral = float(np.trapezoid(v, t)) if hasattr(np, "trapezoid") else float(np.trapz(v, t))
    T = t[-1] - t[0]
    return integral, integral / (R + T * R ** (-b))


def morawetz_bound(records, radii, b):
    """Fit one constant C = geometric mean of the ratios; report the spread max/min."""
    ratios = {R: morawetz_spacetime(records, R, b) for R in radii}
    rs = np.array([v[1] for v in ratios.values()])
    if np.all(rs == 0):
        return {"C": 0.0, "spread": 1.0, "per_R": ratios}
    C = float(np.exp(np.mean(np.log(rs))))
    return {"C": C, "spread": float(rs.max() / rs.min()), "per_R": ratios}


def local_decay_scan(records, radii, window=(0.5, 1.0)):
    """Per radius: min over t in [T/2, T] of local potential and mass, with the
    ratio of the value at the window start to the value at its end.
    A run whose local mass does not drop over the window is flagged.
    """
    if len(records) < 2:
        raise InsufficientDataError("need at least two records")
    T0, T1 = records[0].t, records[-1].t
    lo = T0 + window[0] * (T1 - T0)
    hi = T0 + window[1] * (T1 - T0)
    sel = [r for r in records if lo - 1e-12 <= r.t <= hi + 1e-12]
    if len(sel) < 2:
        raise InsufficientDataError("fewer than two records in the decay window")
    table = []
    for R in radii:
        lm = np.array([r.local_mass[R] for r in sel])
        lp = np.array([r.local_potential[R] for r in sel])
        drop = lm[0] / lm[-1] if lm[-1] > 0 else math.inf
        table.append(
            {
                "R": float(R),
                "min_local_potential": float(lp.min()),
                "min_local_mass": float(lm.min()),
                "local_mass_start": float(lm[0]),
                "local_mass_end": float(lm[-1]),
                "mass_drop_factor": float(drop),
                "decaying": bool(lm[-1] < lm[0]),
            }
        )
    return table


# ------------------------------------------------------- radial Sobolev


def radial_sobolev_check(u, alpha):
    """Return (sup_{|x|>=h} |x|^{N/2-alpha} |u|, ||D^alpha u||, ratio)."""
    g = u.grid
    N = g.dim
    if not 0.5 < alpha < N / 2:
        raise DomainError(f"alpha={alpha} outside (1/2, N/2) = (0.5, {N / 2})")
    r = g.radius
    sel = r >= g.spacing * (1 - 1e-12)
    lhs = float(np.max(r[sel] ** (N / 2 - alpha) * np.abs(u.values[sel])))
    rhs = sobolev_seminorm(u, alpha)
    return lhs, rhs, (lhs / rhs if rhs > 0 else math.inf)


def decay_slope(times, values):
    """Least-squares slope of log(values) against log(times)."""
    res = stats.linregress(np.log(times), np.log(values))
    return float(res.slope)
