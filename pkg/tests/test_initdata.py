import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from crossdiff.grid import Grid1D, PotentialSpec, Potentials
from crossdiff.initdata import (
    PRESETS,
    InitialData,
    InitialDataError,
    build_ratio,
    check_compatibility,
    discrete_tv,
    kernel_weights,
    load_csv,
    load_preset,
    mollify_initial,
    mollify_potentials,
    preset_potentials,
)
from crossdiff.pressure import PressureLaw

GRID = Grid1D(1.0, 256)
LOG = PressureLaw.logarithmic(1.0)


def test_ratio_examples():
    a = np.full(20, 0.7)
    np.testing.assert_array_equal(build_ratio(a, a), 0.5)
    np.testing.assert_array_equal(build_ratio(a, np.zeros(20)), 1.0)
    data = load_preset("segregated_step", GRID)
    np.testing.assert_array_equal(data.r, (GRID.centers < 0.5).astype(float))
    assert discrete_tv(data.r) == 1.0


def test_ratio_vacuum_fill():
    rho1 = np.array([1.0, 0.0, 0.0, 0.0, 0.0, 2.0])
    rho2 = np.array([1.0, 0.0, 0.0, 0.0, 0.0, 0.0])
    r = build_ratio(rho1, rho2)
    # nearest occupied cell, ties to the left
    np.testing.assert_array_equal(r, [0.5, 0.5, 0.5, 1.0, 1.0, 1.0])
    # equidistant hole goes left
    r = build_ratio(np.array([1.0, 0.0, 2.0]), np.array([1.0, 0.0, 0.0]))
    assert r[1] == 0.5


def test_tv_examples():
    assert discrete_tv(np.ones(5)) == 0.0
    u = np.array([0.0, 0.5, 1.0, 3.0])
    assert discrete_tv(u) == 3.0


@pytest.mark.parametrize("name", PRESETS)
def test_presets_unit_mass(name):
    d = load_preset(name, GRID)
    assert abs(GRID.mass(d.rho1) - 1) < 1e-14 and abs(GRID.mass(d.rho2) - 1) < 1e-14


def test_unknown_preset():
    with pytest.raises(InitialDataError):
        load_preset("nope", GRID)


def test_kernel_weights():
    w = kernel_weights(0.05, GRID.dx)
    assert abs(w.sum() - 1) < 1e-15 and np.all(w > 0)
    np.testing.assert_allclose(w, w[::-1])
    assert kernel_weights(GRID.dx / 2, GRID.dx).size == 1


@pytest.mark.parametrize("name", PRESETS)
@pytest.mark.parametrize("collar", ["extend", "fixed"])
def test_mollify_initial(name, collar):
    data = load_preset(name, GRID)
    m = mollify_initial(data, 0.05, collar=collar)
    assert abs(GRID.mass(m.rho1) - 1) < 1e-12
    assert abs(GRID.mass(m.rho2) - 1) < 1e-12
    assert m.sigma.min() > 0
    assert m.info["tv_hat"] <= discrete_tv(data.r) + 2 + 1e-12
    assert np.all((m.r >= 0) & (m.r <= 1))


def test_mollify_uniform_is_identity():
    d = load_preset("uniform", GRID)
    m = mollify_initial(d, 0.05)
    np.testing.assert_allclose(m.rho1, d.rho1, rtol=1e-14)


def test_mollify_rejects_large_eta():
    with pytest.raises(InitialDataError):
        mollify_initial(load_preset("uniform", GRID), 0.5)


def test_mollify_potentials_constant_unchanged():
    c = PotentialSpec("constant", 1.0, value=0.3)
    P = mollify_potentials(c, c, 0.05, GRID)
    np.testing.assert_allclose(P.V1, 0.3, rtol=1e-15)
    assert P.boundary_compatible


def test_mollify_potentials_linear_flat_at_walls():
    lin = PotentialSpec("polynomial", 1.0, coefficients=[0.0, 1.0])
    P = mollify_potentials(lin, PotentialSpec.zero(), 0.05, GRID)
    assert P.dV1[0] == 0.0 and P.dV1[-1] == 0.0
    h = 0.05
    edge = (GRID.centers <= h) | (GRID.centers >= 1 - h)
    left = P.V1[GRID.centers <= h]
    assert np.all(left == left[0]) and edge.any()


def test_mollify_potentials_converges():
    V = PotentialSpec("polynomial", 1.0, coefficients=[0.0, 0.0, 1.0, -2.0 / 3.0])  # x^2 - 2x^3/3, flat at both walls
    grid = Grid1D(1.0, 1024)
    exact = V(grid.faces[1:-1], 1)
    errs = []
    for eta in (0.1, 0.05, 0.025):
        P = mollify_potentials(V, V, eta, grid)
        errs.append(np.sum(np.abs(P.dV1[1:-1] - exact)) * grid.dx)
    assert errs[0] > errs[1] > errs[2]


def _setup(name, eta=0.05):
    d = mollify_initial(load_preset(name, GRID), eta)
    P = mollify_potentials(*preset_potentials(name), eta, GRID)
    return d, P


@pytest.mark.parametrize("name", PRESETS)
def test_compatibility_mollified(name):
    d, P = _setup(name)
    rep = check_compatibility(d, P, LOG, 0.05)
    assert not rep.flagged
    assert np.max(np.abs(rep.zero_order)) < 1e-10 and np.max(np.abs(rep.first_order)) < 1e-10


def test_compatibility_raw_data_flagged():
    raw = load_preset("mixed_gaussians", GRID)
    ramp = 1.0 + GRID.centers
    raw = InitialData.from_densities(GRID, raw.rho1 + ramp, raw.rho2 + 1.0)
    P = Potentials.from_specs(PotentialSpec.zero(), PotentialSpec.zero(), GRID)
    with pytest.warns(RuntimeWarning):
        rep = check_compatibility(raw, P, LOG, 0.05)
    assert rep.flagged


def test_compatibility_narrow_collar_warns():
    g = Grid1D(1.0, 16)
    x = g.centers
    d = InitialData.from_densities(g, 1 + 0.1 * np.cos(np.pi * x), np.ones(16))
    P = Potentials.from_specs(PotentialSpec.zero(), PotentialSpec.zero(), g)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        rep = check_compatibility(d, P, LOG, 0.05)
    assert rep.warnings and caught


def test_load_csv(tmp_path):
    p = tmp_path / "init.csv"
    x = np.linspace(0, 1, 50)
    np.savetxt(p, np.c_[x, 1 + x, 2 - x], delimiter=",", header="x,rho1,rho2", comments="")
    d = load_csv(p, GRID)
    assert abs(GRID.mass(d.rho1) - 1) < 1e-14
    bad = tmp_path / "bad.csv"
    np.savetxt(bad, np.c_[x, x], delimiter=",", header="x,rho1", comments="")
    with pytest.raises(InitialDataError):
        load_csv(bad, GRID)


@settings(max_examples=40, deadline=None)
@given(
    a=arrays(np.float64, 64, elements=st.floats(0.0, 5.0)),
    b=arrays(np.float64, 64, elements=st.floats(0.0, 5.0)),
    eta=st.sampled_from([0.02, 0.05, 0.1]),
)
def test_mollify_properties(a, b, eta):
    g = Grid1D(1.0, 64)
    if g.mass(a) < 1e-3 or g.mass(b) < 1e-3:
        return
    d = InitialData.from_densities(g, a, b)
    m = mollify_initial(d, eta)
    assert abs(g.mass(m.rho1) - 1) < 1e-12 and abs(g.mass(m.rho2) - 1) < 1e-12
    assert np.all(m.rho1 >= 0) and np.all(m.rho2 >= 0) and m.sigma.min() > 0
    assert m.info["tv_hat"] <= discrete_tv(d.r) + 1e-12
    assert discrete_tv(m.r) <= m.info["tv_factor"] * (discrete_tv(d.r) + 2) + 1e-12


@settings(max_examples=60, deadline=None)
@given(a=arrays(np.float64, 30, elements=st.floats(0.0, 3.0)), b=arrays(np.float64, 30, elements=st.floats(0.0, 3.0)))
def test_ratio_properties(a, b):
    r = build_ratio(a, b)
    assert np.all((r >= 0) & (r <= 1))
    occ = a + b > 1e-14
    np.testing.assert_allclose((r * (a + b))[occ], a[occ], rtol=1e-12, atol=1e-300)
