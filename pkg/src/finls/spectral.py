"""Fourier backbone on the periodic box [-L, L)^N.

The box stands in for R^N. Physical samples sit at ``x_j = -L + j*h`` with
``h = 2L/M``; angular frequencies are ``xi_k = pi*k/L`` in FFT ordering.

``forward_transform`` approximates the continuous Fourier transform
``F(xi) = int f(x) exp(-i xi.x) dx``: it scales the DFT by ``h**N`` and
corrects the phase for the box offset, so a centred Gaussian has a real,
positive transform. Multipliers never need that phase and go through the
raw FFT helpers ``fft``/``ifft``.
"""

from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property

import numpy as np
import scipy.fft as sfft

from .errors import ContractViolation, DomainError

__all__ = [
    "Grid",
    "Field",
    "Representation",
    "forward_transform",
    "inverse_transform",
    "apply_multiplier",
    "frac_laplacian",
    "free_propagator",
    "resolvent",
    "resolvent_constant",
    "sobolev_seminorm",
    "l2_norm",
    "inner",
    "fft",
    "ifft",
    "power_symbol",
    "derivative_symbols",
    "gradient",
    "dealias_mask",
]


def fft(a):
    return sfft.fftn(a)


def ifft(a):
    return sfft.ifftn(a)


@dataclass(frozen=True)
class Grid:
    dim: int
    points_per_axis: int
    half_width: float

    def __post_init__(self):
        M = self.points_per_axis
        if self.dim not in (1, 2, 3):
            raise DomainError(f"dim must be 1, 2 or 3, got {self.dim}")
        if M < 16 or M & (M - 1):
            raise DomainError(f"points_per_axis must be a power of two >= 16, got {M}")
        if not self.half_width > 0:
            raise DomainError(f"half_width must be positive, got {self.half_width}")

    @property
    def spacing(self):
        return 2.0 * self.half_width / self.points_per_axis

    @property
    def shape(self):
        return (self.points_per_axis,) * self.dim

    @property
    def size(self):
        return self.points_per_axis**self.dim

    @property
    def cell_volume(self):
        return self.spacing**self.dim

    @cached_property
    def axis(self):
        M, L = self.points_per_axis, self.half_width
        return -L + self.spacing * np.arange(M)

    @cached_property
    def freq_axis(self):
        """Angular frequencies pi*k/L in FFT order (k = 0..M/2-1, -M/2..-1)."""
        return 2.0 * np.pi * np.fft.fftfreq(self.points_per_axis, d=self.spacing)

    @cached_property
    def coords(self):
        return np.meshgrid(*([self.axis] * self.dim), indexing="ij")

    @cached_property
    def freqs(self):
        return np.meshgrid(*([self.freq_axis] * self.dim), indexing="ij")

    @cached_property
    def radius(self):
        return np.sqrt(sum(c * c for c in self.coords))

    @cached_property
    def freq_norm(self):
        return np.sqrt(sum(k * k for k in self.freqs))

    @cached_property
    def derivative_axis(self):
        """i*xi_k per axis with the unpaired Nyquist mode zeroed (keeps real fields real)."""
        k = self.freq_axis.copy()
        k[self.points_per_axis // 2] = 0.0
        return 1j * k

    @cached_property
    def origin_index(self):
        return (self.points_per_axis // 2,) * self.dim

    @cached_property
    def _offset_phase(self):
        # e^{-i xi.(-L)} per axis; equals (-1)^k
        ph = np.exp(1j * self.freq_axis * self.half_width)
        out = ph
        for _ in range(self.dim - 1):
            out = np.multiply.outer(out, ph)
        return out

    def zeros(self, dtype=complex):
        return np.zeros(self.shape, dtype=dtype)

    def refined(self, factor=2):
        return Grid(self.dim, self.points_per_axis * factor, self.half_width)


class Representation(str, Enum):
    PHYSICAL = "physical"
    FREQUENCY = "frequency"


@dataclass(frozen=True)
class Field:
    """Immutable complex (or real) samples on a Grid."""

    grid: Grid
    values: np.ndarray = field(repr=False)
    representation: Representation = Representation.PHYSICAL

    def __post_init__(self):
        vals = np.asarray(self.values)
        if vals.size != self.grid.size:
            raise DomainError(
                f"values have {vals.size} entries, grid needs {self.grid.size}"
            )
        vals = np.array(vals.reshape(self.grid.shape), copy=True)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "representation", Representation(self.representation))

    @classmethod
    def from_function(cls, grid, fn):
        return cls(grid, fn(*grid.coords))

    @property
    def is_physical(self):
        return self.representation is Representation.PHYSICAL

    def with_values(self, values):
        return Field(self.grid, values, self.representation)

    def __mul__(self, c):
        return self.with_values(self.values * c)

    __rmul__ = __mul__

    def __add__(self, other):
        _check_same(self, other)
        return self.with_values(self.values + other.values)

    def __sub__(self, other):
        _check_same(self, other)
        return self.with_values(self.values - other.values)

    def conj(self):
        if not self.is_physical:
            raise ContractViolation("conjugation is defined on physical fields only")
        return self.with_values(np.conj(self.values))


def _check_same(a, b):
    if a.grid != b.grid or a.representation is not b.representation:
        raise ContractViolation("fields live on different grids or representations")


def _require_physical(f, op):
    if not f.is_physical:
        raise ContractViolation(f"{op} expects a physical-space field")


def forward_transform(f):
    _require_physical(f, "forward_transform")
    g = f.grid
    F = g.cell_volume * g._offset_phase * fft(f.values)
    return Field(g, F, Representation.FREQUENCY)


def inverse_transform(F):
    if F.is_physical:
        raise ContractViolation("inverse_transform expects a frequency-space field")
    g = F.grid
    vals = ifft(F.values / (g.cell_volume * g._offset_phase))
    return Field(g, vals, Representation.PHYSICAL)


def _symbol_values(grid, symbol):
    if callable(symbol):
        sym = np.asarray(symbol(*grid.freqs))
    else:
        sym = np.asarray(symbol)
    sym = np.broadcast_to(sym, grid.shape)
    if not np.all(np.isfinite(sym)):
        raise DomainError("multiplier symbol is not finite at every lattice point")
    return sym


def apply_multiplier(f, symbol):
    """Return F^{-1}(symbol * F f) in the representation of ``f``.

    ``symbol`` is either an array on the frequency lattice (FFT order) or a
    callable ``symbol(xi_1, ..., xi_N)`` evaluated on the lattice meshgrid.
    """
    sym = _symbol_values(f.grid, symbol)
    if f.is_physical:
        return f.with_values(ifft(sym * fft(f.values)))
    return f.with_values(sym * f.values)


def power_symbol(grid, sigma):
    """|xi|^sigma with the zero mode set to 0 (or 1 when sigma == 0)."""
    if sigma < 0:
        raise DomainError(f"order must be >= 0, got {sigma}")
    if sigma == 0:
        return np.ones(grid.shape)
    k = grid.freq_norm
    out = np.zeros(grid.shape)
    nz = k > 0
    out[nz] = k[nz] ** sigma
    return out


def derivative_symbols(grid):
    """Symbols of d/dx_k on the lattice, broadcastable to the grid shape."""
    out = []
    for k in range(grid.dim):
        shape = [1] * grid.dim
        shape[k] = grid.points_per_axis
        out.append(grid.derivative_axis.reshape(shape))
    return out


def gradient(f):
    """Spectral gradient of a physical field as a list of physical Fields."""
    _require_physical(f, "gradient")
    F = fft(f.values)
    return [f.with_values(ifft(sym * F)) for sym in derivative_symbols(f.grid)]


def dealias_mask(grid):
    """2/3-rule mask: keep modes with |k_j| < M/3 on every axis."""
    k = np.abs(np.fft.fftfreq(grid.points_per_axis) * grid.points_per_axis)
    keep = k < grid.points_per_axis / 3
    out = keep
    for _ in range(grid.dim - 1):
        out = np.multiply.outer(out, keep)
    return out


def frac_laplacian(f, order):
    """D^order f, i.e. the multiplier |xi|^order; order = 2s gives (-Delta)^s."""
    if order < 0:
        raise DomainError(f"order must be >= 0, got {order}")
    return apply_multiplier(f, power_symbol(f.grid, order))


def free_propagator(f, t, s):
    """exp(-i t D^{2s}) f."""
    return apply_multiplier(f, np.exp(-1j * t * power_symbol(f.grid, 2.0 * s)))


def resolvent_constant(s):
    return np.sqrt(np.sin(np.pi * s) / np.pi)


def resolvent(f, m, s):
    """u_m = c_s (m - Delta)^{-1} f with c_s = sqrt(sin(pi s)/pi)."""
    if not m > 0:
        raise DomainError(f"resolvent parameter must be positive, got {m}")
    k2 = f.grid.freq_norm ** 2
    return apply_multiplier(f, resolvent_constant(s) / (m + k2))


def _values_physical(f):
    return f.values if f.is_physical else inverse_transform(f).values


def l2_norm(f):
    """sqrt(h^N sum |f|^2) for physical fields; Parseval sum for frequency fields."""
    g = f.grid
    if f.is_physical:
        return float(np.sqrt(g.cell_volume * np.sum(np.abs(f.values) ** 2)))
    dxi = np.pi / g.half_width
    return float(np.sqrt((dxi / (2 * np.pi)) ** g.dim * np.sum(np.abs(f.values) ** 2)))


def inner(f, g):
    """<f, g> = h^N sum conj(f) g (physical fields)."""
    _require_physical(f, "inner")
    _require_physical(g, "inner")
    return complex(f.grid.cell_volume * np.vdot(f.values, g.values))


def sobolev_seminorm(f, sigma):
    """||D^sigma f||_{L^2}, evaluated through Parseval on the DFT coefficients."""
    if sigma < 0:
        raise DomainError(f"order must be >= 0, got {sigma}")
    g = f.grid
    if f.is_physical:
        coeffs = fft(f.values)
        scale = g.cell_volume / g.size
    else:
        coeffs = f.values
        scale = (np.pi / g.half_width / (2 * np.pi)) ** g.dim
    weight = power_symbol(g, 2.0 * sigma)
    return float(np.sqrt(scale * np.sum(weight * np.abs(coeffs) ** 2)))
