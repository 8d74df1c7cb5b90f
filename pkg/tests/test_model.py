import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from finls.errors import ValidationError
from finls.model import (
    ModelParams,
    Regime,
    WeightField,
    _epstein_zeta,
    classify_threshold,
    derive_exponents,
    energy,
    kinetic,
    mass,
    me_mg,
    origin_cell_average,
    origin_lattice_value,
    potential,
    virial_functional,
)
from finls.spectral import Field, Grid

from .conftest import gaussian


def test_exponents_reference_point(params):
    e = params.exponents
    assert math.isclose(e.s_c, 0.4)
    assert math.isclose(e.gamma_c, 1.0)
    assert math.isclose(e.B, 3.0)
    assert math.isclose(e.A, 1.0)
    assert math.isclose(e.A + e.B, params.p + 1)


@given(
    st.sampled_from([2, 3]),
    st.floats(0.76, 0.99),
    st.floats(0.05, 0.9),
    st.floats(0.0, 1.0),
)
@settings(max_examples=60)
def test_exponent_identities(N, s, b, frac):
    b = min(b, 1.9 * s)
    lo = 1 + 2 * (2 * s - b) / N
    hi = 1 + 2 * (2 * s - b) / (N - 2 * s)
    p = lo + (hi - lo) * (0.02 + 0.96 * frac)
    e = derive_exponents(ModelParams(N, s, b, p))
    assert 0 < e.s_c < s
    assert math.isclose((p - 1) * e.s_c, s * (e.B - 2), rel_tol=1e-9)
    assert math.isclose(e.gamma_c * (e.B - 2), e.A, rel_tol=1e-9)


@pytest.mark.parametrize(
    "kw",
    [
        dict(dim=1, s=0.8, b=0.4, p=3.0),
        dict(dim=2, s=0.6, b=0.4, p=3.0),
        dict(dim=2, s=1.0, b=0.4, p=3.0),
        dict(dim=2, s=0.8, b=1.7, p=3.0),
        dict(dim=2, s=0.8, b=0.4, p=1.5),
        dict(dim=2, s=0.8, b=0.4, p=20.0),
    ],
)
def test_inadmissible_parameters(kw):
    with pytest.raises(ValidationError):
        ModelParams(kw["dim"], kw["s"], kw["b"], kw["p"])


def test_origin_cell_average_matches_quadrature():
    b, h = 0.4, 0.3
    a = h / 2
    val = integrate.dblquad(lambda y, x: (x * x + y * y) ** (-b / 2), 0, a, 0, a, epsabs=1e-12)[0]
    assert math.isclose(origin_cell_average(2, b, h), 4 * val / h**2, rel_tol=1e-8)


def test_epstein_zeta_known_values():
    # Z_2(s) = 4 zeta(s/2) beta(s/2); at sigma = 0.4 computed independently
    assert math.isclose(_epstein_zeta(0.4, 2), -1.68423, abs_tol=5e-5)
    assert math.isclose(_epstein_zeta(0.4, 3), -1.53491, abs_tol=5e-5)
    # the continuation at sigma -> 0 tends to -1 in every dimension
    assert math.isclose(_epstein_zeta(1e-6, 2), -1.0, abs_tol=1e-4)


def test_lattice_origin_rule_improves_quadrature():
    # int |x|^{-b} exp(-|x|^2) over R^2 = pi Gamma(1 - b/2)
    from scipy.special import gamma

    b = 0.4
    exact = math.pi * gamma(1 - b / 2)
    g = Grid(2, 256, 8.0)
    vals = np.exp(-(g.radius**2))
    errs = {}
    for rule in ("cell_average", "lattice"):
        w = WeightField.build(g, b, rule)
        errs[rule] = abs(g.cell_volume * np.sum(w.values * vals) - exact)
    assert errs["lattice"] < 1e-2 * errs["cell_average"]
    assert origin_lattice_value(2, b, g.spacing) == WeightField.build(g, b, "lattice").values[g.origin_index]


def test_weight_field_rejects_unknown_rule(grid64):
    with pytest.raises(ValidationError):
        WeightField.build(grid64, 0.4, "nearest")


@given(st.floats(0.1, 3.0))
@settings(max_examples=20)
def test_functional_homogeneity(c):
    g = Grid(2, 64, 8.0)
    P = ModelParams(2, 0.8, 0.4, 3.0)
    w = WeightField.build(g, P.b)
    u = gaussian(g, 1.2, kick=[0.3, -0.1])
    v = u * c
    assert math.isclose(mass(v), c**2 * mass(u), rel_tol=1e-12)
    assert math.isclose(kinetic(v, P.s), c**2 * kinetic(u, P.s), rel_tol=1e-12)
    assert math.isclose(potential(v, w, P.p), c ** (P.p + 1) * potential(u, w, P.p), rel_tol=1e-12)


def test_energy_and_virial_definitions(grid64, params, weight64):
    u = gaussian(grid64, 1.0)
    K, Pu = kinetic(u, params.s), potential(u, weight64, params.p)
    assert math.isclose(energy(u, params, weight64), K - Pu / 2)
    assert math.isclose(virial_functional(u, params, weight64), K - 3 * Pu / 4)
    defocus = ModelParams(2, 0.8, 0.4, 3.0, "defocusing")
    assert math.isclose(energy(u, defocus, weight64), K + Pu / 2)


def test_me_mg_at_ground_state(ground128, params):
    ME, MG = me_mg(ground128.Q, ground128)
    assert math.isclose(ME, 1.0, rel_tol=1e-12)
    assert math.isclose(MG, 1.0, rel_tol=1e-12)


@pytest.mark.parametrize("c,regime", [(0.8, Regime.GLOBAL), (1.0, Regime.INDETERMINATE)])
def test_classifier(ground128, params, c, regime):
    rep = classify_threshold(ground128.Q * c, ground128)
    assert rep.regime is regime
    assert set(rep.to_dict()) >= {"regime", "ME", "MG", "virial"}


def test_classifier_blowup_side(ground128, params):
    # a narrowed copy of Q: same mass, more kinetic energy, lower energy ratio
    g = ground128.grid
    Q = ground128.Q
    lam = 1.15
    narrowed = Field(g, np.interp(g.radius * lam, g.radius.ravel()[np.argsort(g.radius.ravel())],
                                  Q.values.real.ravel()[np.argsort(g.radius.ravel())]))
    narrowed = narrowed * math.sqrt(mass(Q) / mass(narrowed)) * 1.02
    rep = classify_threshold(narrowed, ground128)
    assert rep.MG > 1
