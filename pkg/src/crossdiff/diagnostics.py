"""Snapshot diagnostics: energy, dissipation, norm ledgers and the BV growth monitor.

Discrete gradients are face differences (u_{j+1} - u_j) / dx; W^{1,1} norms
are assembled as ||u||_1 + TV(u).
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .grid import Grid1D, Potentials, State
from .initdata import discrete_tv
from .pressure import LOGARITHMIC, S_FLOOR, PressureLaw, eval_f, eval_fprime

__all__ = [
    "discrete_tv",
    "energy_F",
    "dissipation_D",
    "lp_ledger",
    "fisher",
    "b_ledger",
    "gronwall_monitor",
    "DiagnosticsRecord",
    "make_record",
    "record_trajectory",
    "GronwallReport",
]

_LOG_FLOOR = 1e-300


def _entropy(rho):
    # rho log rho with 0 log 0 = 0 and the evaluation floor inside the log
    return np.where(rho > 0, rho * np.log(np.maximum(rho, S_FLOOR)), 0.0)


def energy_F(state: State, pots: Potentials, law: PressureLaw, eta: float, grid: Grid1D) -> float:
    """sum_j [f(sigma) + eta rho1 log rho1 + eta rho2 log rho2 + V1 rho1 + V2 rho2] dx."""
    r1, r2 = state.rho1, state.rho2
    sigma = np.maximum(r1 + r2, S_FLOOR)
    dens = np.asarray(eval_f(law, sigma)) + pots.V1 * r1 + pots.V2 * r2
    if eta > 0:
        dens = dens + eta * (_entropy(r1) + _entropy(r2))
    return float(np.sum(dens) * grid.dx)


def _chemical_potential(rho, fp, V, eta):
    psi = fp + V
    if eta > 0:
        psi = psi + eta * np.log(np.maximum(rho, _LOG_FLOOR))
    return psi


def dissipation_D(state: State, pots: Potentials, law: PressureLaw, eta: float, grid: Grid1D) -> float:
    """-sum over interior faces and species of J_i (psi_i,j+1 - psi_i,j), psi_i = f'(sigma) + V_i + eta log rho_i.

    Each face contributes a non-negative amount; for smooth data this is a
    face quadrature of sum_i int rho_i |d_x psi_i|^2.
    """
    from .solver import _flux_arrays, _fprime_cells

    fp = _fprime_cells(law, state.rho1 + state.rho2)
    J1, J2, _, _ = _flux_arrays(state.rho1, state.rho2, pots.V1, pots.V2, fp, eta, grid.dx)
    d = 0.0
    for J, rho, V in ((J1, state.rho1, pots.V1), (J2, state.rho2, pots.V2)):
        d -= float(np.sum(J[1:-1] * np.diff(_chemical_potential(rho, fp, V, eta))))
    return d


def _grad(u, dx):
    return np.diff(u) / dx


def _grad_sq(u, dx):
    return float(np.sum(_grad(u, dx) ** 2) * dx)


def lp_ledger(sigma, p_list: Sequence[float], theta: float, alpha: float, dx: float) -> dict:
    """||sigma^p||_1, ||sigma^-theta||_1 and ||d_x sigma^((p + alpha - 1)/2)||_2^2 per p.

    When p = 1 - alpha the gradient entry is ||d_x log sigma||_2^2 instead.
    """
    s = np.maximum(np.asarray(sigma, dtype=float), S_FLOOR)
    out = {}
    for p in p_list:
        out[f"L1_sigma^{p:g}"] = float(np.sum(s**p) * dx)
        q = 0.5 * (p + alpha - 1.0)
        if abs(q) < 1e-14:
            out[f"grad_log_sigma[p={p:g}]"] = _grad_sq(np.log(s), dx)
        else:
            out[f"grad_sigma^{q:g}"] = _grad_sq(s**q, dx)
    out[f"L1_sigma^-{theta:g}"] = float(np.sum(s ** (-theta)) * dx)
    return out


def fisher(state: State, law: PressureLaw, grid: Grid1D) -> float:
    """sum over faces of sigma_up |d_x f'(sigma)|^2 dx, sigma_up the larger neighbour (the upwind cell)."""
    sigma = np.maximum(state.rho1 + state.rho2, S_FLOOR)
    g = _grad(np.asarray(eval_fprime(law, sigma)), grid.dx)
    up = np.maximum(sigma[1:], sigma[:-1])
    return float(np.sum(up * g * g) * grid.dx)


def grad_g_l1(state: State, law: PressureLaw, grid: Grid1D) -> float:
    """||sigma d_x f'(sigma)||_1, the discrete form of ||d_x g(sigma)||_1."""
    sigma = np.maximum(state.rho1 + state.rho2, S_FLOOR)
    g = _grad(np.asarray(eval_fprime(law, sigma)), grid.dx)
    mid = 0.5 * (sigma[1:] + sigma[:-1])
    return float(np.sum(np.abs(mid * g)) * grid.dx)


def _w11(u, dx):
    return float(np.sum(np.abs(u)) * dx) + discrete_tv(u)


def b_ledger(state: State, pots: Potentials, law: PressureLaw, eta: float, grid: Grid1D) -> dict:
    """Named instantaneous integrands of the BV growth coefficient and their unit-weight sum."""
    dx = grid.dx
    s = np.maximum(state.rho1 + state.rho2, S_FLOOR)
    out = {
        "fisher": fisher(state, law, grid),
        "grad_log_sigma_L2sq": _grad_sq(np.log(s), dx),
    }
    if law.kind != LOGARITHMIC:
        a = law.exponent
        out.update(
            {
                "sigma^(1-a)_W11": _w11(s ** (1 - a), dx),
                "sigma^(1-2a)_L1": float(np.sum(s ** (1 - 2 * a)) * dx),
                "eta*sigma^(2-2a)_W11": eta * _w11(s ** (2 - 2 * a), dx),
                "eta*grad_sigma^((1-a)/2)_L2sq": eta * _grad_sq(s ** (0.5 * (1 - a)), dx),
                "eta^2*grad_sigma^(3-3a)_L1": eta**2 * discrete_tv(s ** (3 - 3 * a)),
                "eta^2*grad_sigma^(1-a)_L2sq": eta**2 * _grad_sq(s ** (1 - a), dx),
                "eta^3*grad_sigma^((3-3a)/2)_L2sq": eta**3 * _grad_sq(s ** (1.5 * (1 - a)), dx),
            }
        )
    out["total"] = float(sum(out.values()))
    return out


@dataclass
class DiagnosticsRecord:
    t: float
    mass1: float
    mass2: float
    tv_r: float
    tv_phi: float
    energy_F: float
    dissipation_D: float
    lp_norms: dict
    reciprocal_norm: float
    fisher: float
    grad_g_L1: float
    b_ledger: dict
    min_sigma: float
    max_sigma: float
    min_phi: float
    max_phi: float
    omega_left: float
    clamped_cells: int
    clip_counter: int

    def to_dict(self) -> dict:
        return asdict(self)

    def finite(self) -> bool:
        vals = [v for v in self.to_dict().values() if isinstance(v, (int, float))]
        vals += list(self.lp_norms.values()) + list(self.b_ledger.values())
        return all(math.isfinite(v) for v in vals)


def make_record(state: State, pots: Potentials, law: PressureLaw, eta: float, grid: Grid1D,
                evaluator=None, p_list=(2.0,), theta: float = 0.5, clip_counter: int = 0) -> DiagnosticsRecord:
    from .solver import omega_phi, transform

    sigma, r = transform(state)
    omega, phi = omega_phi(state, pots, law, eta, evaluator)
    ledger = lp_ledger(sigma, p_list, theta, law.exponent, grid.dx)
    recip = ledger[f"L1_sigma^-{theta:g}"]
    return DiagnosticsRecord(
        t=float(state.t),
        mass1=grid.mass(state.rho1),
        mass2=grid.mass(state.rho2),
        tv_r=discrete_tv(r),
        tv_phi=discrete_tv(phi),
        energy_F=energy_F(state, pots, law, eta, grid),
        dissipation_D=dissipation_D(state, pots, law, eta, grid),
        lp_norms=ledger,
        reciprocal_norm=recip,
        fisher=fisher(state, law, grid),
        grad_g_L1=grad_g_l1(state, law, grid),
        b_ledger=b_ledger(state, pots, law, eta, grid),
        min_sigma=float(sigma.min()),
        max_sigma=float(sigma.max()),
        min_phi=float(phi.min()),
        max_phi=float(phi.max()),
        omega_left=float(omega[0]),
        clamped_cells=int(np.count_nonzero(sigma < S_FLOOR)),
        clip_counter=int(clip_counter),
    )


def record_trajectory(traj) -> list:
    """Fill ``traj.records`` with one record per stored snapshot."""
    c = traj.config
    ev = traj.evaluator()
    clips = np.cumsum(traj.log.clipped) if traj.log.steps else np.zeros(0, dtype=int)
    traj.records = []
    for state in traj.states:
        done = int(np.searchsorted(traj.log.t, state.t, side="left")) if traj.log.steps else 0
        count = int(clips[done - 1]) if done > 0 else 0
        traj.records.append(make_record(state, c.potentials, c.law, c.eta, c.grid, ev, c.p_list, c.theta, count))
    return traj.records


# -- BV growth monitor ----------------------------------------------------------

@dataclass
class GronwallReport:
    times: np.ndarray
    tv_phi: np.ndarray
    b_integral: np.ndarray
    C_G: float
    worst_pair: tuple

    def to_dict(self) -> dict:
        return {"C_G": self.C_G, "worst_pair": list(self.worst_pair), "b_integral_T": float(self.b_integral[-1])}


def gronwall_monitor(traj_or_records, b_total: Optional[np.ndarray] = None) -> GronwallReport:
    """Smallest C_G with TV(phi(t1)) + 1 <= C_G exp(int_t0^t1 B) (TV(phi(t0)) + 1) for all t0 <= t1.

    B is the unit-weight ledger sum, integrated by the trapezoid rule between
    record times.  Pairs with t0 = t1 are included, so C_G >= 1.
    """
    records = getattr(traj_or_records, "records", traj_or_records)
    if len(records) < 2:
        raise ValueError("the monitor needs at least two records")
    t = np.array([r.t for r in records])
    tv = np.array([r.tv_phi for r in records])
    b = np.array([r.b_ledger["total"] for r in records]) if b_total is None else np.asarray(b_total, dtype=float)
    cum = np.concatenate(([0.0], np.cumsum(0.5 * (b[1:] + b[:-1]) * np.diff(t))))
    # log of the ratio for each pair (k0 <= k1)
    lg = np.log(tv + 1.0)
    ratio = (lg[None, :] - cum[None, :]) - (lg[:, None] - cum[:, None])
    ratio = np.where(np.triu(np.ones_like(ratio, dtype=bool)), ratio, -np.inf)
    k0, k1 = np.unravel_index(np.argmax(ratio), ratio.shape)
    return GronwallReport(t, tv, cum, float(np.exp(ratio[k0, k1])), (float(t[k0]), float(t[k1])))


# -- invariant summary ------------------------------------------------------------

def invariant_summary(traj, mass_tol: float = 1e-10, deficit_tol: float = 1e-10, tv_slack: float = 1e-8) -> dict:
    """Machine-readable pass/fail for the run-level invariants of one trajectory."""
    records = traj.records or record_trajectory(traj)
    c, lg = traj.config, traj.log
    m1 = np.array([r.mass1 for r in records])
    m2 = np.array([r.mass2 for r in records])
    drift = float(max(np.max(np.abs(m1 - m1[0])), np.max(np.abs(m2 - m2[0]))))
    min_rho = float(min(min(s.rho1.min(), s.rho2.min()) for s in traj.states))
    out = {
        "mass_conservation": {"value": drift, "limit": mass_tol, "passed": drift < mass_tol},
        "positivity": {"value": min_rho, "limit": 0.0, "passed": min_rho >= 0.0},
        "clip_deficit": {"value": lg.worst_deficit, "limit": deficit_tol, "passed": lg.worst_deficit <= deficit_tol},
        "sigma_positive": {"value": min(r.min_sigma for r in records), "limit": 0.0,
                           "passed": min(r.min_sigma for r in records) > 0.0},
        "phi_in_unit_interval": {
            "value": [min(r.min_phi for r in records), max(r.max_phi for r in records)],
            "limit": [0.0, 1.0],
            "passed": min(r.min_phi for r in records) >= 0.0 and max(r.max_phi for r in records) <= 1.0,
        },
        "records_finite": {"value": all(r.finite() for r in records), "limit": True,
                           "passed": all(r.finite() for r in records)},
    }
    if lg.steps and np.all(np.isfinite(lg.energy)):
        excess = float(np.max(lg.energy_increments() - 10.0 * lg.dt * (c.grid.dx + lg.dt)))
        out["energy_monotone"] = {"value": excess, "limit": 0.0, "passed": excess <= 0.0}
    if c.potentials.equal:
        tv = np.array([r.tv_r for r in records])
        growth = float(np.max(tv - tv[0]))
        out["tv_r_monotone"] = {"value": growth, "limit": tv_slack, "passed": growth <= tv_slack}
    out["passed"] = all(v["passed"] for v in out.values() if isinstance(v, dict))
    return out
