import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from finls.errors import ContractViolation, DomainError
from finls.spectral import (
    Field,
    Grid,
    apply_multiplier,
    dealias_mask,
    forward_transform,
    frac_laplacian,
    free_propagator,
    gradient,
    inner,
    inverse_transform,
    l2_norm,
    power_symbol,
    resolvent,
    resolvent_constant,
    sobolev_seminorm,
)

from .conftest import gaussian

GRID = Grid(2, 32, 6.0)


def random_field(seed, grid=GRID):
    rng = np.random.default_rng(seed)
    return Field(grid, rng.normal(size=grid.shape) + 1j * rng.normal(size=grid.shape))


seeds = st.integers(0, 2**32 - 1)
orders = st.floats(0.0, 2.0, allow_nan=False)


def test_grid_validation():
    with pytest.raises(DomainError):
        Grid(2, 100, 1.0)
    with pytest.raises(DomainError):
        Grid(2, 64, 0.0)
    with pytest.raises(DomainError):
        Grid(4, 64, 1.0)


def test_grid_geometry():
    g = Grid(2, 64, 8.0)
    assert g.spacing == 0.25
    assert g.axis[0] == -8.0 and g.axis[g.points_per_axis // 2] == 0.0
    assert g.radius[g.origin_index] == 0.0
    assert np.isclose(g.freq_axis[1], np.pi / 8.0)


def test_field_is_immutable():
    f = random_field(0)
    with pytest.raises(ValueError):
        f.values[0, 0] = 1.0


def test_field_size_mismatch():
    with pytest.raises(DomainError):
        Field(GRID, np.zeros(10))


def test_continuous_transform_of_gaussian():
    g = Grid(2, 128, 12.0)
    u = gaussian(g, width=1.0)
    F = forward_transform(u)
    exact = 2 * np.pi * np.exp(-(g.freq_norm**2) / 2)
    assert np.max(np.abs(F.values - exact)) < 1e-10


@given(seeds)
def test_transform_roundtrip(seed):
    f = random_field(seed)
    back = inverse_transform(forward_transform(f))
    assert np.allclose(back.values, f.values, atol=1e-12)


@given(seeds)
def test_parseval(seed):
    f = random_field(seed)
    assert np.isclose(l2_norm(f), l2_norm(forward_transform(f)), rtol=1e-12)
    assert np.isclose(sobolev_seminorm(f, 0.7), sobolev_seminorm(forward_transform(f), 0.7), rtol=1e-12)


@given(seeds, orders, orders)
@settings(max_examples=30)
def test_multiplier_semigroup(seed, a, b):
    f = random_field(seed)
    lhs = frac_laplacian(frac_laplacian(f, a), b)
    rhs = frac_laplacian(f, a + b)
    assert np.allclose(lhs.values, rhs.values, atol=1e-9 * (1 + np.max(np.abs(rhs.values))))


@given(seeds, st.floats(-5, 5), st.floats(-5, 5), st.floats(0.5, 0.99))
@settings(max_examples=30)
def test_free_propagator_group_and_unitarity(seed, t1, t2, s):
    f = random_field(seed)
    a = free_propagator(free_propagator(f, t1, s), t2, s)
    b = free_propagator(f, t1 + t2, s)
    assert np.allclose(a.values, b.values, atol=1e-10)
    assert np.isclose(l2_norm(a), l2_norm(f), rtol=1e-12)


@given(seeds, st.floats(0.5, 0.99))
@settings(max_examples=20)
def test_seminorm_matches_operator(seed, s):
    f = random_field(seed)
    D = frac_laplacian(f, s)
    assert np.isclose(l2_norm(D), sobolev_seminorm(f, s), rtol=1e-10)


@given(seeds, seeds)
def test_inner_is_hermitian(s1, s2):
    f, g = random_field(s1), random_field(s2)
    assert np.isclose(inner(f, g), np.conj(inner(g, f)))
    assert np.isclose(inner(f, f).real, l2_norm(f) ** 2)


def test_power_symbol_zero_mode_and_validation():
    assert power_symbol(GRID, 1.3)[0, 0] == 0.0
    assert np.all(power_symbol(GRID, 0.0) == 1.0)
    with pytest.raises(DomainError):
        power_symbol(GRID, -1.0)


def test_multiplier_callable_and_nonfinite():
    f = random_field(1)
    a = apply_multiplier(f, lambda x, y: x * x + y * y)
    b = frac_laplacian(f, 2.0)
    assert np.allclose(a.values, b.values)
    with pytest.raises(DomainError), np.errstate(divide="ignore"):
        apply_multiplier(f, lambda x, y: 1 / (x * x + y * y))


def test_frequency_representation_contracts():
    F = forward_transform(random_field(2))
    with pytest.raises(ContractViolation):
        forward_transform(F)
    with pytest.raises(ContractViolation):
        inverse_transform(random_field(2))
    with pytest.raises(ContractViolation):
        random_field(2) + F


def test_gradient_of_gaussian():
    g = Grid(2, 128, 12.0)
    u = gaussian(g, width=1.5)
    gx, gy = gradient(u)
    X, Y = g.coords
    assert np.max(np.abs(gx.values - (-X / 1.5**2) * u.values)) < 1e-10
    assert np.max(np.abs(gy.values - (-Y / 1.5**2) * u.values)) < 1e-10


def test_gradient_keeps_real_fields_real():
    rng = np.random.default_rng(3)
    u = Field(GRID, rng.normal(size=GRID.shape))
    for d in gradient(u):
        assert np.max(np.abs(d.values.imag)) < 1e-12


def test_resolvent_inverts_shifted_laplacian():
    f = random_field(4)
    m, s = 2.5, 0.8
    um = resolvent(f, m, s)
    back = apply_multiplier(um, m + GRID.freq_norm**2)
    assert np.allclose(back.values, resolvent_constant(s) * f.values)
    with pytest.raises(DomainError):
        resolvent(f, 0.0, s)


def test_dealias_mask_two_thirds():
    mask = dealias_mask(Grid(1, 64, 1.0))
    assert mask.sum() == 43  # |k| <= 21 of 64
