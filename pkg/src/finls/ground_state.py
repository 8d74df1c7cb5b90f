"""Ground state Q of  -D^{2s}Q - Q + |x|^{-b} Q^p = 0  by Petviashvili iteration.

The fixed point Q = (1 + D^{2s})^{-1}(w Q^p) is unstable as a plain iteration
(it either collapses or blows up); the stabilizing factor S_n^gamma with
gamma = p/(p-1) fixes the amplitude. Every ``radialize_every`` iterations the
iterate is averaged over the symmetry group of the grid (axis reflections and
permutations) to remove drift away from radial symmetry.
"""

from dataclasses import dataclass, field
from itertools import permutations, product

import numpy as np

from . import _kernels
from .errors import ConvergenceError, DomainError
from .model import WeightField, energy, kinetic, mass, potential
from .spectral import Field, fft, ifft, power_symbol

__all__ = [
    "GroundStateOptions",
    "GroundStateResult",
    "solve_ground_state",
    "sharp_gn_constant",
    "gn_ratio",
    "radialize",
    "default_initial_guess",
]


@dataclass(frozen=True)
class GroundStateOptions:
    max_iter: int = 3000
    tol: float = 1e-10
    residual_target: float = 1e-8  # relative to ||Q||
    radialize_every: int = 10
    gamma: float | None = None  # None -> p/(p-1)


@dataclass
class GroundStateResult:
    Q: Field
    params: object
    weight: WeightField
    mass_Q: float
    kinetic_Q: float
    potential_Q: float
    energy: float
    k_opt: float
    residual: float
    iterations: int
    history: list = field(default_factory=list, repr=False)

    @property
    def grid(self):
        return self.Q.grid

    @property
    def norm_Q(self):
        return float(np.sqrt(self.mass_Q))

    def pohozaev_residuals(self):
        """(|K - (B/A) M|, |P - ((p+1)/A) M|) in absolute units."""
        e = self.params.exponents
        M = self.mass_Q
        return (
            abs(self.kinetic_Q - e.B / e.A * M),
            abs(self.potential_Q - (self.params.p + 1) / e.A * M),
        )

    def summary(self):
        pk, pp = self.pohozaev_residuals()
        return {
            "mass_Q": self.mass_Q,
            "kinetic_Q": self.kinetic_Q,
            "potential_Q": self.potential_Q,
            "energy_Q": self.energy,
            "k_opt": self.k_opt,
            "gn_ratio_at_Q": gn_ratio(self.Q, self.params, self.weight),
            "residual": self.residual,
            "relative_residual": self.residual / self.norm_Q,
            "iterations": self.iterations,
            "pohozaev_kinetic_residual": pk,
            "pohozaev_potential_residual": pp,
        }


def _reflect(a, axis):
    # x -> -x on the grid x_j = -L + j h maps index j to (M - j) mod M
    return np.roll(np.flip(a, axis=axis), 1, axis=axis)


def radialize(a):
    """Average over coordinate reflections and axis permutations."""
    dim = a.ndim
    acc = np.zeros_like(a)
    count = 0
    for perm in permutations(range(dim)):
        b = np.transpose(a, perm)
        for flips in product((False, True), repeat=dim):
            c = b
            for ax, f in enumerate(flips):
                if f:
                    c = _reflect(c, ax)
            acc += c
            count += 1
    return acc / count


def default_initial_guess(grid):
    width = grid.half_width / 6.0
    return Field(grid, np.exp(-(grid.radius**2) / (2 * width**2)))


def _residual(Q, lin_sym, w, p, h_vol):
    r = _kernels.power_source(Q, w, p) - np.real(ifft(lin_sym * fft(Q)))
    return float(np.sqrt(h_vol * np.sum(r * r)))


def solve_ground_state(params, grid, init=None, opts=None, weight=None):
    opts = opts or GroundStateOptions()
    p, s = params.p, params.s
    gamma = opts.gamma if opts.gamma is not None else p / (p - 1)
    w = weight if weight is not None else WeightField.build(grid, params.b)
    init = init if init is not None else default_initial_guess(grid)
    Q = np.real(np.asarray(init.values)).astype(float)
    if np.max(np.abs(np.imag(init.values))) > 0 or Q.min() < 0 or not np.any(Q > 0):
        raise DomainError("initial guess must be real, nonnegative and nonzero")

    h_vol = grid.cell_volume
    lin_sym = 1.0 + power_symbol(grid, 2 * s)
    norm_Q = np.sqrt(h_vol * np.sum(Q * Q))
    history = []

    for it in range(1, opts.max_iter + 1):
        src = _kernels.power_source(Q, w.values, p)
        Qh = fft(Q)
        num = np.sum(lin_sym * np.abs(Qh) ** 2) / grid.size
        den = np.sum(Q * src)
        S = num / den if den != 0 else np.inf
        if not np.isfinite(S) or S < 1e-12 or S > 1e12:
            raise ConvergenceError(f"stabilizing factor diverged (S={S}) at iteration {it}", history)
        Qn = S**gamma * np.real(ifft(fft(src) / lin_sym))
        if opts.radialize_every and it % opts.radialize_every == 0:
            Qn = radialize(Qn)
        norm_new = np.sqrt(h_vol * np.sum(Qn * Qn))
        if not np.isfinite(norm_new) or norm_new < 1e-300:
            raise ConvergenceError(f"iterate collapsed to zero at iteration {it}", history)
        change = float(np.sqrt(h_vol * np.sum((Qn - Q) ** 2)) / norm_new)
        Q, norm_Q = Qn, norm_new
        history.append({"iteration": it, "S": float(S), "change": change, "norm": float(norm_Q)})
        if change <= opts.tol:
            break
    else:
        res = _residual(Q, lin_sym, w.values, p, h_vol)
        if res > opts.residual_target * norm_Q:
            raise ConvergenceError(
                f"no convergence after {opts.max_iter} iterations (last change {change:.3e})", history
            )

    res = _residual(Q, lin_sym, w.values, p, h_vol)
    return _finalize(Q, params, w, res, it, history)


def _finalize(Q, params, w, res, iterations, history):
    grid = w.grid
    field_Q = Field(grid, Q.astype(complex))
    MQ = mass(field_Q)
    KQ = kinetic(field_Q, params.s)
    PQ = potential(field_Q, w, params.p)
    e = params.exponents
    k_opt = (params.p + 1) / e.A * (e.A / e.B) ** (e.B / 2) * np.sqrt(MQ) ** (1 - params.p)
    return GroundStateResult(
        Q=field_Q,
        params=params,
        weight=w,
        mass_Q=MQ,
        kinetic_Q=KQ,
        potential_Q=PQ,
        energy=energy(field_Q, params, w),
        k_opt=float(k_opt),
        residual=res,
        iterations=iterations,
        history=history,
    )


def gn_ratio(u, params, w):
    """P[u] / (||u||^A ||D^s u||^B); equals K_opt at an optimizer."""
    e = params.exponents
    M = mass(u)
    K = kinetic(u, params.s)
    if M == 0 or K == 0:
        return 0.0
    return potential(u, w, params.p) / (np.sqrt(M) ** e.A * np.sqrt(K) ** e.B)


def sharp_gn_constant(result, exps=None):
    """Return (closed-form K_opt, empirical ratio at Q)."""
    return result.k_opt, gn_ratio(result.Q, result.params, result.weight)
