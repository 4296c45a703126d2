import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crossdiff.pressure import CUSTOM, PressureDomainError, PressureLaw
from crossdiff.xi import XiEvaluator

ORACLE = json.loads((Path(__file__).parent / "oracles" / "xi_eta_power.json").read_text())
POW = PressureLaw.power(0.5, 1.0)
LOG = PressureLaw.logarithmic(1.0)
S100 = np.logspace(-2, 2, 100)


def test_xi_closed_form_values():
    ev = XiEvaluator(POW, 0.0)
    assert ev.xi(1.0) == pytest.approx(-4.0, rel=1e-15)
    assert ev.xi(4.0) == pytest.approx(-8.0, rel=1e-15)
    np.testing.assert_allclose(XiEvaluator(LOG).xi(S100), -1.0)


def test_xi_quadrature_matches_closed_form():
    ev = XiEvaluator(POW, 0.0)
    np.testing.assert_allclose(ev.xi_quad(S100), -S100**0.5 / 0.25, rtol=1e-8)


@pytest.mark.parametrize("eta", ["0", "0.01", "0.1", "0.5", "1"])
def test_xi_eta_against_frozen_oracle(eta):
    ev = XiEvaluator(POW, float(eta))
    s = np.array([float(k) for k in ORACLE[eta]])
    ref = np.array(list(ORACLE[eta].values()))
    np.testing.assert_allclose(ev.xi_eta(s), ref, rtol=1e-9)


def test_xi_eta_direct_agrees_with_table():
    ev = XiEvaluator(POW, 0.1)
    s = np.array([0.03, 1.0, 30.0])
    np.testing.assert_allclose(ev.xi_eta_direct(s), ev.xi_eta(s), rtol=1e-8)


def test_log_law_xi_eta_closed_form():
    for eta in (0.0, 0.05, 1.0):
        ev = XiEvaluator(PressureLaw.logarithmic(2.0), eta)
        np.testing.assert_allclose(ev.xi_eta(S100), -1.0 / (2.0 + 2 * eta), rtol=1e-15)


def test_eta_zero_reduces_to_xi():
    ev = XiEvaluator(POW, 0.0)
    np.testing.assert_array_equal(ev.xi_eta(S100), ev.xi(S100))


def test_derivative_values():
    assert XiEvaluator(POW, 0.0).xi_eta_prime(1.0) == pytest.approx(-2.0, rel=1e-13)
    assert XiEvaluator(POW, 0.0).xi_eta_second(1.0) == pytest.approx(1.0, rel=1e-12)
    np.testing.assert_allclose(XiEvaluator(LOG, 0.0).xi_eta_prime(S100), 0.0, atol=1e-12)
    np.testing.assert_allclose(XiEvaluator(LOG, 0.0).xi_eta_second(S100), 0.0, atol=1e-10)


def test_ode_residual_examples():
    assert abs(XiEvaluator(LOG, 0.0).ode_residual(2.0)) < 1e-8
    assert abs(XiEvaluator(POW, 0.0).ode_residual(1.0)) < 1e-6
    s = np.logspace(-2, 2, 50)
    assert np.max(np.abs(XiEvaluator(POW, 0.1).ode_residual(s))) < 1e-5


@pytest.mark.parametrize("eta", [0.0, 0.01, 0.1, 1.0])
@pytest.mark.parametrize("lawname", ["log", "power"])
def test_ode_residual_battery(lawname, eta):
    law = LOG if lawname == "log" else POW
    assert np.max(np.abs(XiEvaluator(law, eta).ode_residual(S100))) < 1e-5


def test_bounds_power_eta_half_all_pass():
    rep = XiEvaluator(POW, 0.5).verify_bounds(S100)
    assert all(rep.applicable.values())
    assert rep.passed
    for name in rep.lhs:
        assert rep.passes(name).all(), name


def test_bounds_eta_zero_equality():
    rep = XiEvaluator(POW, 0.0).verify_bounds(S100)
    np.testing.assert_allclose(rep.lhs["general_0"], rep.rhs["general_0"], rtol=1e-15)


def test_bounds_custom_law_outside_hypothesis():
    # f'' = exp(-s) + 1/s; s f'''/f'' grows without bound, violating the ratio condition for large s
    law = PressureLaw(
        CUSTOM, alpha=0.5, kappa=2.0,
        f=lambda s: np.exp(-s) + s * np.log(s),
        fprime=lambda s: -np.exp(-s) + np.log(s) + 1.0,
        fsecond=lambda s: np.exp(-s) + 1.0 / s,
        fthird=lambda s: -np.exp(-s) - 1.0 / s**2,
    )
    s = np.logspace(-1, 1, 12)
    rep = XiEvaluator(law, 0.1).verify_bounds(s)
    assert not rep.applicable["kappa_1"]
    assert rep.applicable["general_1"]
    assert all(np.isfinite(rep.lhs[k]).all() for k in rep.lhs)


def test_custom_law_matches_power_closed_form():
    law = PressureLaw(
        CUSTOM, alpha=0.5, kappa=4.0,
        f=lambda s: -2.0 * np.sqrt(s),
        fprime=lambda s: -1.0 / np.sqrt(s),
        fsecond=lambda s: 0.5 * s**-1.5,
        fthird=lambda s: -0.75 * s**-2.5,
    )
    s = np.array([0.01, 1.0, 100.0])
    np.testing.assert_allclose(XiEvaluator(law, 0.0).xi(s), -4.0 * np.sqrt(s), rtol=1e-9)
    ref = np.array([ORACLE["0.1"][k] for k in ("0.01", "1", "100")])
    np.testing.assert_allclose(XiEvaluator(law, 0.1).xi_eta(s), ref, rtol=1e-8)


def test_invalid_inputs():
    with pytest.raises(ValueError):
        XiEvaluator(POW, 1.5)
    with pytest.raises(PressureDomainError):
        XiEvaluator(POW, 0.1).xi_eta(0.0)


@settings(max_examples=40, deadline=None)
@given(alpha=st.floats(0.1, 0.9), eta=st.floats(0.0, 1.0), s=st.floats(1e-2, 1e2))
def test_sign_and_ordering(alpha, eta, s):
    ev = XiEvaluator(PressureLaw.power(alpha, 1.0), eta)
    xi, xe = ev.xi(s), ev.xi_eta(s)
    assert xi <= 0 and xe <= 0
    assert abs(xe) <= abs(xi) * (1 + 1e-10)


@settings(max_examples=25, deadline=None)
@given(eta=st.floats(0.0, 1.0), s=st.floats(1e-2, 1e2))
def test_xi_eta_monotone_in_eta(eta, s):
    # larger viscosity damps xi_eta further
    lo = XiEvaluator(POW, eta).xi_eta(s)
    hi = XiEvaluator(POW, min(1.0, eta + 0.1)).xi_eta(s)
    assert abs(hi) <= abs(lo) * (1 + 1e-10)
