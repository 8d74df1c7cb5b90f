"""Seeded invariant suite behind ``finls verify``.

Every check yields a row ``(name, passed, measured, tolerance, detail)``.
The suite exits with EXIT_PROPERTY when any row fails.
"""

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from ..cutoffs import CutoffKind, CutoffSpec
from ..diagnostics import balakrishnan_identity, localized_energy_sweep, radial_sobolev_check
from ..errors import ValidationError
from ..ground_state import gn_ratio, sharp_gn_constant
from ..model import energy, kinetic, mass, potential
from ..spectral import Field
from .config import config_hash
from .io import read_snapshot, write_csv, write_manifest
from .recipes import EXIT_OK, EXIT_PROPERTY, solve_ground

__all__ = [
    "Check",
    "random_subthreshold_corpus",
    "gaussian_corpus",
    "mode_corpus",
    "pohozaev_check",
    "run_suite",
    "cmd_verify",
]

# localized-energy radii as fractions of the box half-width
ENERGY_RADII = (1 / 32, 1 / 16, 1 / 8, 3 / 16, 1 / 4, 3 / 8, 1 / 2, 5 / 8, 3 / 4, 7 / 8)
ENERGY_TAIL_FRACTION = 0.1


@dataclass
class Check:
    name: str
    passed: bool
    measured: float
    tolerance: float
    detail: str = ""


# ------------------------------------------------------------- corpora


def _gaussian_bump(grid, rng):
    X = grid.coords
    c = rng.uniform(-grid.half_width / 4, grid.half_width / 4, grid.dim)
    width = rng.uniform(0.6, 3.0)
    k = rng.normal(0.0, 1.0, grid.dim)
    r2 = sum((x - ci) ** 2 for x, ci in zip(X, c))
    phase = rng.uniform(0, 2 * np.pi) + sum(ki * x for ki, x in zip(k, X))
    return rng.uniform(0.3, 1.0) * np.exp(-r2 / (2 * width**2) + 1j * phase)


def random_subthreshold_corpus(ground, n, eps, rng):
    """n random sums of 1-3 modulated Gaussians, each rescaled so that
    P[u] M[u]^gamma_c is a uniform random fraction in [0.05, 1 - eps] of Q's.
    """
    g = ground.grid
    params = ground.params
    gam = params.exponents.gamma_c
    thr = ground.potential_Q * ground.mass_Q**gam
    homog = params.p + 1 + 2 * gam  # P M^gam is homogeneous of this degree
    out = []
    for _ in range(n):
        v = sum(_gaussian_bump(g, rng) for _ in range(rng.integers(1, 4)))
        u = Field(g, v)
        level = rng.uniform(0.05, 1 - eps)
        pm = potential(u, ground.weight, params.p) * mass(u) ** gam
        out.append(u * (level * thr / pm) ** (1 / homog))
    return out


def gaussian_corpus(grid, widths=(0.75, 1.0, 1.5, 2.0)):
    r2 = grid.radius**2
    x0 = grid.coords[0]
    return [Field(grid, np.exp(-r2 / (2 * w**2) + 0.5j * x0)) for w in widths]


def mode_corpus(grid, wavenumbers=((1, 0), (0, 3), (2, 5), (8, 8), (16, 3))):
    """Single Fourier modes exp(i k.x) with k = n pi / L."""
    L = grid.half_width
    out = []
    for n in wavenumbers:
        n = tuple(n) + (0,) * (grid.dim - len(n))
        phase = sum(ni * np.pi / L * x for ni, x in zip(n, grid.coords))
        out.append(Field(grid, np.exp(1j * phase) * np.ones(grid.shape)))
    return out


# -------------------------------------------------------------- checks


def _rel(a, b):
    return abs(a - b) / abs(b) if b else abs(a)


def pohozaev_check(Q, params, w, tol):
    """K = (B/A) M and P = ((p+1)/A) M at Q, residuals relative to ||Q||^2."""
    e = params.exponents
    M = mass(Q)
    K = kinetic(Q, params.s)
    P = potential(Q, w, params.p)
    rk = abs(K - e.B / e.A * M) / M
    rp = abs(P - (params.p + 1) / e.A * M) / M
    return [
        Check("pohozaev_kinetic", rk <= tol, rk, tol, f"K={K!r} (B/A)M={e.B / e.A * M!r}"),
        Check("pohozaev_potential", rp <= tol, rp, tol, f"P={P!r} ((p+1)/A)M={(params.p + 1) / e.A * M!r}"),
    ]


def _balakrishnan_checks(grid, s, quad, vs):
    out = []
    for label, corpus, tol in (
        ("gaussian", gaussian_corpus(grid), vs.balakrishnan_gauss_tol),
        ("mode", mode_corpus(grid), vs.balakrishnan_mode_tol),
    ):
        errs = []
        for u in corpus:
            lhs, rhs = balakrishnan_identity(u, s, quad)
            errs.append(_rel(rhs, lhs))
        worst = max(errs)
        out.append(Check(f"balakrishnan_{label}", worst <= tol, worst, tol, f"{len(corpus)} fields"))
    return out


def _gn_checks(ground, corpus, vs):
    params, w = ground.params, ground.weight
    k_closed, k_emp = sharp_gn_constant(ground)
    gap = _rel(k_emp, k_closed)
    worst = max(gn_ratio(u, params, w) / k_closed - 1 for u in corpus)
    return [
        Check("gn_constant_at_Q", gap <= vs.identity_tol, gap, vs.identity_tol,
              f"closed={k_closed!r} empirical={k_emp!r}"),
        Check("gn_random_fields", worst <= vs.gn_slack, worst, vs.gn_slack,
              f"max ratio/K_opt - 1 over {len(corpus)} fields"),
    ]


def _coercivity_checks(ground, corpus, eps):
    """Count violations of Coer0-Coer3; measured = worst relative margin."""
    params, w = ground.params, ground.weight
    e = params.exponents
    B, gam, p1 = e.B, e.gamma_c, params.p + 1
    thr = ground.potential_Q * ground.mass_Q**gam
    q_eps = (1 - eps) ** ((B - 2) / B)
    rows = {"coer0": [], "coer1": [], "coer2": [], "coer3": []}
    for u in corpus:
        P = potential(u, w, params.p)
        K = kinetic(u, params.s)
        E = energy(u, params, w)
        ratio = P * mass(u) ** gam / thr
        rows["coer0"].append((p1 / B * ratio ** ((B - 2) / B) * K - P) / P)
        rows["coer1"].append((p1 / B * q_eps * K - P) / P)
        rows["coer2"].append((K - B / p1 * P - (1 - q_eps) * K) / K)
        rows["coer3"].append((E - (B - 2) / B * K) / K)
    out = []
    for name, margins in rows.items():
        bad = sum(m < 0 for m in margins)
        out.append(Check(name, bad == 0, float(min(margins)), 0.0,
                         f"{bad} violations over {len(margins)} fields (min relative margin)"))
    return out


def _energy_checks(fields, s, floor):
    """Slack of the localized energy inequality with its smallest O(1/R)
    constant C, and decay of the excess: (lhs - rhs)_+ R at the largest
    radius must be at most ENERGY_TAIL_FRACTION * C.
    """
    radii = [f * fields[0].grid.half_width for f in ENERGY_RADII]
    worst_slack = math.inf
    worst_tail = 0.0
    for u in fields:
        sweep = localized_energy_sweep(u, s, radii)
        worst_slack = min(worst_slack, min(r["slack"] for r in sweep["rows"]))
        if sweep["C"] > 0:
            worst_tail = max(worst_tail, sweep["rows"][-1]["excess_times_R"] / sweep["C"])
    return [
        Check("localized_energy_slack", worst_slack >= floor, worst_slack, floor,
              f"{len(fields)} fields, R/L in {[round(f, 4) for f in ENERGY_RADII]}"),
        Check("localized_energy_bounded", worst_tail <= ENERGY_TAIL_FRACTION, worst_tail, ENERGY_TAIL_FRACTION,
              "max over fields of excess*R at the largest R divided by C"),
    ]


def _cutoff_checks(grid, tol):
    out = []
    for kind in (CutoffKind.PSI, CutoffKind.F_VIRIAL):
        for R in (grid.half_width / 8, grid.half_width / 4):
            for name, (ok, viol) in CutoffSpec(R, kind).check(grid, tol).items():
                out.append(Check(f"cutoff {kind.value} R={R:g}: {name}", bool(ok), float(viol), tol))
    return out


def _sobolev_check(grid, s, n):
    widths = np.geomspace(0.8, 3.0, n)
    r2 = grid.radius**2
    ratios = [radial_sobolev_check(Field(grid, np.exp(-r2 / (2 * w**2))), s)[2] for w in widths]
    med = float(np.median(ratios))
    spread = max(max(ratios) / med, med / min(ratios))
    return [Check("radial_sobolev_constant", spread <= 2.0, spread, 2.0,
                  f"alpha={s}, {n} radial Gaussians, median ratio {med!r}")]


# --------------------------------------------------------------- suite


def run_suite(cfg, ground=None, Q_override=None):
    """Run every check. ``Q_override`` replaces Q in the Pohozaev check only."""
    vs = cfg.verify
    params = cfg.model_params()
    grid = cfg.build_grid()
    ground = ground or solve_ground(cfg, params, grid)
    rng = np.random.default_rng(cfg.seed)
    corpus = random_subthreshold_corpus(ground, vs.corpus_size, vs.subthreshold_epsilon, rng)
    checks = []
    checks += _balakrishnan_checks(grid, params.s, cfg.diagnostics.quadrature(), vs)
    Q = Q_override if Q_override is not None else ground.Q
    checks += pohozaev_check(Q, params, ground.weight, vs.identity_tol)
    checks += _gn_checks(ground, corpus, vs)
    checks += _coercivity_checks(ground, corpus, vs.subthreshold_epsilon)
    checks += _energy_checks([ground.Q] + corpus[:5], params.s, vs.energy_slack_floor)
    checks += _cutoff_checks(grid, vs.cutoff_tol)
    checks += _sobolev_check(grid, params.s, vs.sobolev_corpus_size)
    return checks


def cmd_verify(cfg, out_dir, ground=None):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    Q_override = None
    if cfg.verify.ground_snapshot:
        Q_override, _ = read_snapshot(cfg.verify.ground_snapshot)
        if Q_override.grid != cfg.build_grid():
            raise ValidationError("ground_snapshot grid does not match the config grid")
    checks = run_suite(cfg, ground, Q_override)
    write_csv(out / "verify_checks.csv", ["check", "passed", "measured", "tolerance", "detail"],
              [[c.name, c.passed, c.measured, c.tolerance, c.detail] for c in checks])
    failed = [c.name for c in checks if not c.passed]
    res = {"checks": [asdict(c) for c in checks], "failed": failed, "passed": not failed}
    (out / "verify_report.json").write_text(json.dumps(_plain(res), indent=2, sort_keys=True) + "\n")
    tol = {k: v for k, v in cfg.verify.model_dump().items() if k != "ground_snapshot"}
    write_manifest(out / "verify_manifest.json", "verify", config_hash(cfg), tol,
                   {"failed": failed, "n_checks": len(checks)},
                   ["verify_checks.csv", "verify_report.json"])
    return (EXIT_PROPERTY if failed else EXIT_OK), res


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    return obj

