"""Radial cutoff templates psi and f, their rescalings psi_R, f_R and the
derivatives needed by the localized virial identity.

Both templates are built from the C^infinity step

    S(t) = (1 + tanh(1/(1-t) - 1/t)) / 2   on (0, 1),   S = 0 for t <= 0,  S = 1 for t >= 1,

which is flat to all orders at both ends and satisfies S(1-t) = 1 - S(t).

* psi(r) = 1 - S(2r - 1): equal to 1 on [0, 1/2], 0 on [1, inf), values in [0, 1].
* f is specified through f'(r):
    f'(r) = r                      for r <= 1,
    f'(r) = r (1 - S((r-1)/a))     for 1 <= r <= 1+a,
    f'(r) = 0                      for r >= 1+a,
  with a in (0, 1] fixed so that f(1+a) = 1 exactly. Then f = r^2/2 on [0,1],
  f = 1 for r >= 2, f' <= r and f'' <= 1. Because f'(1) = 1 and f' must
  fall to 0 on [1, 2], f'' is necessarily negative somewhere, so no template
  can meet the lower bound f'' >= 0; ``CutoffSpec.check`` measures that
  violation instead of hiding it.

Rescaled fields are F(x) = R^2 f(|x|/R) and psi_R(x) = psi(|x|/R). All
derivatives are analytic.
"""

from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np
from scipy import optimize

from .errors import DomainError

__all__ = [
    "smooth_step",
    "psi_profile",
    "f_profile",
    "virial_width",
    "CutoffKind",
    "CutoffSpec",
]


def smooth_step(t, nderiv=0):
    """Return [S, S', ..., S^(nderiv)] at ``t`` (nderiv <= 3)."""
    t = np.asarray(t, dtype=float)
    inside = (t > 0) & (t < 1)
    ti = np.where(inside, t, 0.5)
    u, v = 1.0 - ti, ti
    z = 1.0 / u - 1.0 / v
    T = np.tanh(z)
    with np.errstate(over="ignore"):
        q = 1.0 / np.cosh(z) ** 2  # 1 - T^2 without cancellation
    out = [np.where(inside, 0.5 * (1.0 + T), np.where(t >= 1, 1.0, 0.0))]
    if nderiv >= 1:
        z1 = 1 / u**2 + 1 / v**2
        s1 = 0.5 * q
        out.append(np.where(inside, s1 * z1, 0.0))
    if nderiv >= 2:
        z2 = 2 / u**3 - 2 / v**3
        s2 = -T * q
        out.append(np.where(inside, s2 * z1**2 + s1 * z2, 0.0))
    if nderiv >= 3:
        z3 = 6 / u**4 + 6 / v**4
        s3 = -q * (1 - 3 * T**2)
        out.append(np.where(inside, s3 * z1**3 + 3 * s2 * z1 * z2 + s1 * z3, 0.0))
    if nderiv > 3:
        raise DomainError("smooth_step provides at most three derivatives")
    return out


def psi_profile(r):
    """psi(r) = 1 - S(2r - 1)."""
    return 1.0 - smooth_step(2.0 * np.asarray(r, dtype=float) - 1.0)[0]


@lru_cache(maxsize=None)
def virial_width():
    """Transition width a with int_1^{1+a} r (1 - S((r-1)/a)) dr = 1/2."""
    t, wt = np.polynomial.legendre.leggauss(200)
    t = (1 + t) / 2
    c = 0.5 * np.sum(wt * t * (1 - smooth_step(t)[0]))
    # a/2 + c a^2 = 1/2
    return float(optimize.brentq(lambda a: a / 2 + c * a * a - 0.5, 1e-6, 1.0, xtol=1e-15))


def f_profile(r):
    """Return (f, f', f'', f''', f'''') of the virial template at radii ``r``."""
    r = np.asarray(r, dtype=float)
    a = virial_width()
    tau = (r - 1.0) / a
    S, S1, S2, S3 = smooth_step(tau, 3)
    inner = r <= 1.0
    outer = r >= 1.0 + a
    mid = ~(inner | outer)

    f1 = np.where(inner, r, np.where(outer, 0.0, r * (1 - S)))
    f2 = np.where(inner, 1.0, np.where(outer, 0.0, 1 - S - r / a * S1))
    f3 = np.where(mid, -2 / a * S1 - r / a**2 * S2, 0.0)
    f4 = np.where(mid, -3 / a**2 * S2 - r / a**3 * S3, 0.0)

    f0 = np.where(inner, 0.5 * r * r, 1.0)
    if np.any(mid):
        f0 = f0.copy()
        f0[mid] = 0.5 + _f_mid_integral(r[mid], a)
    return f0, f1, f2, f3, f4


def _f_mid_integral(x, a, nodes=64):
    # Gauss-Legendre on [1, x]; the integrand is analytic inside the band
    t, wt = np.polynomial.legendre.leggauss(nodes)
    half = (x - 1.0) / 2
    rr = 1.0 + np.multiply.outer(half, 1 + t)
    g = rr * (1 - smooth_step((rr - 1) / a)[0])
    return half * (g @ wt)


class CutoffKind(str, Enum):
    PSI = "psi"
    F_VIRIAL = "f_virial"


@dataclass(frozen=True)
class CutoffSpec:
    radius: float
    kind: CutoffKind = CutoffKind.F_VIRIAL

    def __post_init__(self):
        object.__setattr__(self, "kind", CutoffKind(self.kind))
        if not self.radius > 0:
            raise DomainError(f"cutoff radius must be positive, got {self.radius}")

    # ---- psi
    def psi(self, grid):
        self._need(CutoffKind.PSI)
        return psi_profile(grid.radius / self.radius)

    # ---- f_R and its derivatives
    def radial_derivatives(self, r):
        """(F, F', F'', F''', F'''') of F(r) = R^2 f(r/R)."""
        self._need(CutoffKind.F_VIRIAL)
        R = self.radius
        f0, f1, f2, f3, f4 = f_profile(np.asarray(r) / R)
        return R * R * f0, R * f1, f2, f3 / R, f4 / R**2

    def values(self, grid):
        return self.radial_derivatives(grid.radius)[0]

    def gradient(self, grid):
        """List of d_k F = F'(r) x_k / r (zero at the origin)."""
        _, F1, *_ = self.radial_derivatives(grid.radius)
        ratio = _safe_ratio(F1, grid.radius, 1.0)
        return [ratio * x for x in grid.coords]

    def hessian(self, grid):
        """Nested list H[k][l] = F'' x_k x_l / r^2 + (F'/r)(delta_kl - x_k x_l / r^2)."""
        r = grid.radius
        _, F1, F2, *_ = self.radial_derivatives(r)
        ratio = _safe_ratio(F1, r, 1.0)
        rr = np.where(r > 0, r, 1.0)
        xs = [np.where(r > 0, x / rr, 0.0) for x in grid.coords]
        N = grid.dim
        H = [[None] * N for _ in range(N)]
        for k in range(N):
            for l in range(k, N):
                delta = 1.0 if k == l else 0.0
                h = (F2 - ratio) * xs[k] * xs[l] + ratio * delta
                H[k][l] = H[l][k] = h
        return H

    def laplacian(self, grid):
        r = grid.radius
        _, F1, F2, *_ = self.radial_derivatives(r)
        return F2 + (grid.dim - 1) * _safe_ratio(F1, r, 1.0)

    def bilaplacian(self, grid):
        """Delta^2 F for radial F; identically 0 on |x| <= R where F = r^2/2."""
        N = grid.dim
        r = grid.radius
        _, F1, F2, F3, F4 = self.radial_derivatives(r)
        rr = np.where(r > 0, r, 1.0)
        out = F4 + 2 * (N - 1) * F3 / rr + (N - 1) * (N - 3) * (F2 / rr**2 - F1 / rr**3)
        return np.where(r <= self.radius, 0.0, out)

    # ---- pointwise properties
    def check(self, grid, atol=1e-12):
        """Measure each stated pointwise property on the grid.

        Returns {name: (ok, worst_violation)}; a violation is the amount by
        which the inequality fails (0 when it holds).
        """
        r = grid.radius
        if self.kind is CutoffKind.PSI:
            psi = self.psi(grid)
            rho = r / self.radius
            res = {
                "psi=1 on B(1/2)": _viol(np.abs(psi - 1)[rho <= 0.5]),
                "psi=0 outside B(1)": _viol(np.abs(psi)[rho >= 1]),
                "0<=psi<=1": _viol(np.maximum(-psi, psi - 1)),
            }
        else:
            R = self.radius
            F, F1, F2, *_ = self.radial_derivatives(r)
            lap = self.laplacian(grid)
            rho = r / R
            res = {
                "f_R=|x|^2/2 on B(R)": _viol(np.abs(F - 0.5 * r * r)[rho <= 1]),
                "f_R=R^2 outside B(2R)": _viol(np.abs(F - R * R)[rho >= 2]),
                "f_R''>=0": _viol(-F2),
                "f_R''<=1": _viol(F2 - 1),
                "f_R'<=r": _viol(F1 - r),
                "N-Laplacian(f_R)>=0": _viol(lap - grid.dim),
            }
        return {k: (v <= atol, v) for k, v in res.items()}

    def _need(self, kind):
        if self.kind is not kind:
            raise DomainError(f"operation needs a {kind.value} cutoff, this one is {self.kind.value}")


def _safe_ratio(F1, r, at_zero):
    rr = np.where(r > 0, r, 1.0)
    return np.where(r > 0, F1 / rr, at_zero)


def _viol(x):
    x = np.asarray(x)
    return float(max(np.max(x), 0.0)) if x.size else 0.0
