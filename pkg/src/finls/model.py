"""Model parameters, exponent bookkeeping, the weight |x|^{-b} and the
conserved / threshold functionals of the inhomogeneous fractional NLS

    i u_t - (-Delta)^s u = -sign |x|^{-b} |u|^{p-1} u,   sign = +1 focusing.
"""

from dataclasses import asdict, dataclass
from enum import Enum
from functools import cached_property

import numpy as np
from scipy import integrate, special

from . import _kernels
from .errors import ConsistencyError, ValidationError
from .spectral import l2_norm, sobolev_seminorm

__all__ = [
    "Sign",
    "ModelParams",
    "DerivedExponents",
    "WeightField",
    "derive_exponents",
    "origin_cell_average",
    "origin_lattice_value",
    "ORIGIN_RULES",
    "mass",
    "potential",
    "kinetic",
    "energy",
    "virial_functional",
    "me_mg",
    "Regime",
    "ThresholdReport",
    "classify_threshold",
    "BOUNDARY_BAND",
]

BOUNDARY_BAND = 1e-6


class Sign(str, Enum):
    FOCUSING = "focusing"
    DEFOCUSING = "defocusing"

    @property
    def value_int(self):
        return 1 if self is Sign.FOCUSING else -1


@dataclass(frozen=True)
class DerivedExponents:
    s_c: float
    gamma_c: float
    B: float
    A: float
    p_star: float
    p_upper: float


@dataclass(frozen=True)
class ModelParams:
    dim: int
    s: float
    b: float
    p: float
    sign: Sign = Sign.FOCUSING

    def __post_init__(self):
        object.__setattr__(self, "sign", Sign(self.sign))
        N, s, b, p = self.dim, self.s, self.b, self.p
        if N not in (2, 3):
            raise ValidationError(f"dim must be 2 or 3, got {N}")
        lo = N / (2 * N - 1)
        if not lo < s < 1:
            raise ValidationError(f"s={s} violates N/(2N-1) = {lo:.6g} < s < 1")
        if not 0 < b < 2 * s:
            raise ValidationError(f"b={b} violates 0 < b < 2s = {2 * s:.6g}")
        p_star = 1 + 2 * (2 * s - b) / N
        p_upper = 1 + 2 * (2 * s - b) / (N - 2 * s)
        if not p_star < p:
            raise ValidationError(f"p={p} violates p > p_* = {p_star:.6g} (mass-critical bound)")
        if not p < p_upper:
            raise ValidationError(f"p={p} violates p < p^* = {p_upper:.6g} (energy-critical bound)")

    @property
    def sign_int(self):
        return self.sign.value_int

    @cached_property
    def exponents(self):
        return derive_exponents(self)

    def to_dict(self):
        d = asdict(self)
        d["sign"] = self.sign.value
        return d

    def scattering_conditions(self):
        """Extra hypotheses under which the global regime is also proved to scatter."""
        N, s, b, p = self.dim, self.s, self.b, self.p
        checks = {
            "N>=3": N >= 3,
            "s>N/(N+1)": s > N / (N + 1),
            "p>2(1-b/N)": p > 2 * (1 - b / N),
        }
        if N == 3:
            checks["p<(N-2b)/(N-2s)"] = p < (N - 2 * b) / (N - 2 * s)
        return checks


def derive_exponents(params):
    N, s, b, p = params.dim, params.s, params.b, params.p
    s_c = N / 2 - (2 * s - b) / (p - 1)
    B = (N * (p - 1) + 2 * b) / (2 * s)
    A = p + 1 - B
    exps = DerivedExponents(
        s_c=s_c,
        gamma_c=(s - s_c) / s_c,
        B=B,
        A=A,
        p_star=1 + 2 * (2 * s - b) / N,
        p_upper=1 + 2 * (2 * s - b) / (N - 2 * s),
    )
    if not (0 < s_c < s and A > 0 and B > 2):
        raise ValidationError(f"parameters are not inter-critical: {exps}")
    return exps


# ------------------------------------------------------------------ weight


def origin_cell_average(dim, b, h):
    """Mean of |x|^{-b} over the cube [-h/2, h/2]^dim.

    Divergence theorem with div(x |x|^{-b}) = (dim - b)|x|^{-b} reduces the
    cube integral to one face:
        int_cube = 2 dim a / (dim - b) * int_{[-a,a]^{dim-1}} (a^2 + |y|^2)^{-b/2} dy.
    The face integral is a Gauss hypergeometric value in 2D and a 1D integral
    of one in 3D.
    """
    a = h / 2
    if dim == 2:
        face = 2 * special.hyp2f1(b / 2, 0.5, 1.5, -1.0)
    elif dim == 3:

        def inner(y):
            c2 = 1 + y * y
            return 2 * c2 ** (-b / 2) * special.hyp2f1(b / 2, 0.5, 1.5, -1.0 / c2)

        face = 2 * integrate.quad(inner, 0.0, 1.0, epsabs=0, epsrel=1e-13)[0]
    else:
        raise ValueError("dim must be 2 or 3")
    unit_cube = 2 * dim / (dim - b) * face  # cube [-1,1]^dim
    return unit_cube * a ** (-b) / 2**dim


def _epstein_zeta(sigma, dim, terms=6):
    """Sum over nonzero n in Z^dim of |n|^{-sigma}, analytically continued, 0 < sigma < dim.

    Theta-function splitting: both halves are incomplete-gamma tails that
    decay like exp(-pi |n|^2), so a handful of shells is exact to rounding.
    """
    a = sigma / 2
    c = dim / 2 - a
    r = np.arange(-terms, terms + 1)
    n2 = sum(x * x for x in np.meshgrid(*([r] * dim), indexing="ij")).ravel()
    x = np.pi * n2[n2 > 0]
    tail = special.gammaincc(a, x) * special.gamma(a) / x**a
    tail += special.gammaincc(c, x) * special.gamma(c) / x**c
    total = -1 / a - 1 / c + np.sum(tail)
    return float(total * np.pi**a / special.gamma(a))


def origin_lattice_value(dim, b, h):
    """Origin sample that makes the lattice sum of |x|^{-b} g exact to high order.

    For smooth g the punctured sum h^N sum_{x != 0} |x|^{-b} g(x) misses the
    integral by -Z(b) h^{N-b} g(0) + (higher order), where Z is the Epstein
    zeta of Z^N. Putting w(0) = -Z(b) h^{-b} cancels that leading defect.
    """
    return -_epstein_zeta(b, dim) * h ** (-b)


ORIGIN_RULES = {"cell_average": origin_cell_average, "lattice": origin_lattice_value}


@dataclass(frozen=True)
class WeightField:
    grid: object
    exponent: float
    values: np.ndarray
    origin_rule: str = "cell_average"

    @classmethod
    def build(cls, grid, b, origin_rule="cell_average"):
        """Sample |x|^{-b}; the origin gets ``origin_rule`` ("cell_average" or "lattice")."""
        if origin_rule not in ORIGIN_RULES:
            raise ValidationError(f"unknown origin_rule {origin_rule!r}; use one of {sorted(ORIGIN_RULES)}")
        r = grid.radius
        vals = np.empty(grid.shape)
        nz = r > 0
        vals[nz] = r[nz] ** (-b)
        vals[~nz] = ORIGIN_RULES[origin_rule](grid.dim, b, grid.spacing)
        vals.setflags(write=False)
        return cls(grid, b, vals, origin_rule)

    @cached_property
    def max_off_origin(self):
        """Largest weight value excluding the origin cell (= h^{-b})."""
        return float(self.grid.spacing ** (-self.exponent))


# -------------------------------------------------------------- functionals


def mass(u):
    return l2_norm(u) ** 2


def potential(u, w, p):
    """P[u] = int |x|^{-b} |u|^{p+1} dx."""
    g = u.grid
    return g.cell_volume * _kernels.weighted_abs_power_sum(u.values, w.values, p + 1.0)


def kinetic(u, s):
    """||D^s u||^2."""
    return sobolev_seminorm(u, s) ** 2


def energy(u, params, w):
    P = potential(u, w, params.p)
    return kinetic(u, params.s) - params.sign_int * 2.0 / (params.p + 1) * P


def virial_functional(u, params, w):
    B = params.exponents.B
    return kinetic(u, params.s) - B / (params.p + 1) * potential(u, w, params.p)


def me_mg(u, ground, params=None, w=None):
    """Scale-invariant mass-energy and mass-"gradient" ratios against Q.

    The "gradient" is the fractional seminorm ||D^s .||.
    """
    params = params or ground.params
    w = w or ground.weight
    gam = params.exponents.gamma_c
    EQ = ground.energy
    MQ = ground.mass_Q
    if not (EQ > 0 and MQ > 0):
        raise ConsistencyError(f"ground state has E[Q]={EQ}, M[Q]={MQ}; expected both > 0")
    Mu = mass(u)
    Ku = kinetic(u, params.s)
    Eu = energy(u, params, w)
    ME = (Mu / MQ) ** gam * (Eu / EQ)
    MG = (Mu / MQ) ** (gam / 2) * np.sqrt(Ku / ground.kinetic_Q)
    return float(ME), float(MG)


class Regime(str, Enum):
    GLOBAL = "global_scattering_regime"
    BLOWUP = "blowup_regime"
    INDETERMINATE = "indeterminate"


@dataclass(frozen=True)
class ThresholdReport:
    regime: Regime
    ME: float
    MG: float
    potential_mass: float  # P[u] M[u]^gamma_c
    potential_mass_Q: float  # P[Q] M[Q]^gamma_c
    virial: float  # I[u]
    scattering_conditions: dict

    def to_dict(self):
        d = asdict(self)
        d["regime"] = self.regime.value
        return d


def classify_threshold(u, ground, params=None, w=None, band=BOUNDARY_BAND):
    params = params or ground.params
    w = w or ground.weight
    ME, MG = me_mg(u, ground, params, w)
    gam = params.exponents.gamma_c
    if ME < 1 - band and MG < 1 - band:
        regime = Regime.GLOBAL
    elif ME < 1 - band and MG > 1 + band:
        regime = Regime.BLOWUP
    else:
        regime = Regime.INDETERMINATE
    return ThresholdReport(
        regime=regime,
        ME=ME,
        MG=MG,
        potential_mass=potential(u, w, params.p) * mass(u) ** gam,
        potential_mass_Q=ground.potential_Q * ground.mass_Q**gam,
        virial=virial_functional(u, params, w),
        scattering_conditions=params.scattering_conditions(),
    )
