import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from helpers import LOG, POW, make_run
from crossdiff.diagnostics import (
    DiagnosticsRecord,
    b_ledger,
    discrete_tv,
    dissipation_D,
    energy_F,
    fisher,
    gronwall_monitor,
    invariant_summary,
    lp_ledger,
    make_record,
)
from crossdiff.grid import Grid1D, PotentialSpec, Potentials, State
from crossdiff.pressure import PressureLaw

GRID = Grid1D(1.0, 64)


def _zero(grid=GRID):
    return Potentials.from_specs(PotentialSpec.zero(grid.L), PotentialSpec.zero(grid.L), grid)


def _state(r1, r2):
    return State(0.0, np.asarray(r1, float), np.asarray(r2, float))


def test_tv_examples():
    assert discrete_tv(np.full(8, 3.0)) == 0.0
    assert discrete_tv([0, 0, 1, 1]) == 1.0
    assert discrete_tv([1.0, 2.0, 2.5, 7.0]) == 6.0


def test_energy_closed_form():
    g = Grid1D(2.0, 32)
    s = _state(np.full(32, 0.25), np.full(32, 0.25))
    lam = 3.0
    F = energy_F(s, _zero(g), PressureLaw.logarithmic(lam), 0.0, g)
    assert F == pytest.approx(lam * math.log(0.5), rel=1e-14)


def test_energy_shift_by_constant():
    x = GRID.centers
    s = _state(1 + 0.5 * np.cos(np.pi * x), np.ones(64))
    base = energy_F(s, _zero(), POW, 0.1, GRID)
    shifted = Potentials.from_specs(PotentialSpec("constant", value=0.7), PotentialSpec.zero(), GRID)
    assert energy_F(s, shifted, POW, 0.1, GRID) - base == pytest.approx(0.7 * GRID.mass(s.rho1), rel=1e-12)


def test_energy_vacuum_cells():
    r = np.ones(64)
    r[:10] = 0.0
    assert math.isfinite(energy_F(_state(r, np.ones(64)), _zero(), LOG, 0.1, GRID))


def _unit(a):
    return a / GRID.mass(a)


@settings(max_examples=60, deadline=None)
@given(
    a=arrays(np.float64, 64, elements=st.floats(1e-3, 10.0)),
    b=arrays(np.float64, 64, elements=st.floats(1e-3, 10.0)),
    eta=st.floats(0.0, 1.0),
    amp=st.floats(-1.0, 1.0),
)
def test_energy_lower_bound_and_dissipation_sign(a, b, eta, amp):
    r1, r2 = _unit(a), _unit(b)
    s = _state(r1, r2)
    P = Potentials.from_specs(PotentialSpec.cosine([amp]), PotentialSpec.cosine([-amp]), GRID)
    L = GRID.L
    vmax = abs(amp)
    # log law: s log s >= -1/e; power law: Jensen on the concave s^alpha with mass 2
    floors = {
        "log": -L / math.e,
        "power": -1.0 / (1 - 0.5) * L**0.5 * 2**0.5,
    }
    for name, law in (("log", LOG), ("power", POW)):
        F = energy_F(s, P, law, eta, GRID)
        assert F >= floors[name] - 2 * eta * L / math.e - 2 * vmax - 1e-12
        assert dissipation_D(s, P, law, eta, GRID) >= 0.0
        assert fisher(s, law, GRID) >= 0.0


def test_dissipation_uniform_zero():
    assert dissipation_D(_state(np.ones(64), np.ones(64)), _zero(), LOG, 0.1, GRID) == 0.0


@pytest.mark.parametrize("law", [LOG, POW], ids=["log", "power"])
def test_fisher_equals_inviscid_single_species_dissipation(law):
    x = GRID.centers
    s = _state(1 + 0.5 * np.cos(np.pi * x) + 0.2 * np.sin(4 * x), np.zeros(64))
    assert fisher(s, law, GRID) == pytest.approx(dissipation_D(s, _zero(), law, 0.0, GRID), rel=1e-12)


def test_fisher_constant_zero():
    assert fisher(_state(np.ones(64), np.ones(64)), POW, GRID) == 0.0


def test_lp_ledger_constant():
    g = Grid1D(2.0, 32)
    sig = np.full(32, 2 / g.L)
    led = lp_ledger(sig, (1.5, 2.0, 0.5), 0.5, 0.5, g.dx)
    for p in (1.5, 2.0, 0.5):
        assert led[f"L1_sigma^{p:g}"] == pytest.approx(g.L * (2 / g.L) ** p, rel=1e-14)
    assert led["grad_log_sigma[p=0.5]"] == 0.0  # p = 1 - alpha
    assert led["grad_sigma^0.5"] == 0.0
    assert led["L1_sigma^-0.5"] == pytest.approx(g.L * (2 / g.L) ** -0.5)


def test_b_ledger_constant_and_log():
    s = _state(np.full(64, 0.8), np.full(64, 1.2))
    led = b_ledger(s, _zero(), POW, 0.1, GRID)
    assert led["fisher"] == 0.0 and led["grad_log_sigma_L2sq"] == 0.0
    assert led["sigma^(1-2a)_L1"] == pytest.approx(1.0)  # q = 0
    assert led["sigma^(1-a)_W11"] == pytest.approx(2.0**0.5)
    assert set(b_ledger(s, _zero(), LOG, 0.1, GRID)) == {"fisher", "grad_log_sigma_L2sq", "total"}


def test_b_ledger_eta_terms_vanish():
    x = GRID.centers
    s = _state(1 + 0.5 * np.cos(np.pi * x), np.ones(64))
    led = b_ledger(s, _zero(), POW, 0.0, GRID)
    for k, v in led.items():
        if k.startswith("eta"):
            assert v == 0.0
    small = b_ledger(s, _zero(), POW, 1e-6, GRID)
    assert all(abs(v) < 1e-5 for k, v in small.items() if k.startswith("eta"))


def _records(tv, t):
    base = make_record(_state(np.ones(64), np.ones(64)), _zero(), LOG, 0.1, GRID)
    out = []
    for ti, v in zip(t, tv):
        d = base.to_dict()
        d.update(t=ti, tv_phi=v)
        out.append(DiagnosticsRecord(**d))
    return out


def test_gronwall_constant_trajectory():
    rep = gronwall_monitor(_records([0.0, 0.0, 0.0], [0.0, 0.5, 1.0]))
    assert rep.C_G == 1.0


def test_gronwall_hand_example():
    recs = _records([0.0, 1.0], [0.0, 1.0])
    assert gronwall_monitor(recs, b_total=np.zeros(2)).C_G == pytest.approx(2.0)
    assert gronwall_monitor(recs, b_total=np.full(2, 0.3)).C_G == pytest.approx(2 * math.exp(-0.3))
    assert gronwall_monitor(recs, b_total=np.full(2, 5.0)).C_G == 1.0
    with pytest.raises(ValueError):
        gronwall_monitor(recs[:1])


def test_record_fields_on_run():
    traj = make_run("segregated_step", law=POW, n=64, T=0.01, output_every=0.005)
    assert len(traj.records) == 3
    for r in traj.records:
        assert r.finite()
        assert r.omega_left == 1.0
        assert abs(r.mass1 - 1) < 1e-12
    summary = invariant_summary(traj)
    assert summary["passed"], summary
    assert "tv_r_monotone" not in summary


def test_equal_potentials_tv_r_non_increasing():
    from crossdiff.config import Scenario

    V = PotentialSpec.cosine([0.2])
    sc = Scenario("eq", POW, n=128, L=1.0, eta=0.05, T=0.05, preset="partial_overlap", V1=V, V2=V,
                  output_every=0.005)
    from crossdiff.solver import run

    summary = invariant_summary(run(sc.build()))
    assert summary["tv_r_monotone"]["passed"]
    assert summary["passed"]


@pytest.mark.parametrize("law", [LOG, POW], ids=["log", "power"])
def test_discrete_dissipation_balance_refines(law):
    # |dF/dt + D| / (|D| + 1) shrinks with dt and dx
    errs = []
    for n in (64, 128):
        traj = make_run("mixed_gaussians", law=law, n=n, T=0.005)
        lg = traj.log
        rate = lg.energy_increments() / lg.dt
        errs.append(np.max(np.abs(rate + lg.dissipation) / (np.abs(lg.dissipation) + 1)))
    assert errs[1] < errs[0]
