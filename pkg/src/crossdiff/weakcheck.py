"""Weak-form residuals of computed trajectories and vanishing-viscosity refinement studies.

For a test function phi(t, x) = psi(t) cos(k pi x / L) with psi(0) = 1 and
psi = 0 from t_off on, a weak solution of the limit system satisfies

    int rho_0 phi(0) dx + int int rho d_t phi = int int rho d_x(f'(sigma) + V) d_x phi,

and a solution of the viscous system picks up the extra term
eta int int rho d_xx phi on the left.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .pressure import S_FLOOR, eval_fprime

MIN_SNAPSHOTS = 8
_GAUSS_X, _GAUSS_W = np.polynomial.legendre.leggauss(8)


class WeakCheckError(ValueError):
    pass


@dataclass(frozen=True)
class TestFunction:
    """phi(t, x) = psi(t) cos(k pi x / L) with psi(t) = cos^2(pi t / (2 t_off)) on [0, t_off], 0 after."""

    __test__ = False  # not a pytest class

    k: int
    t_off: float
    L: float = 1.0

    def __post_init__(self):
        if self.k < 0 or not self.t_off > 0:
            raise WeakCheckError("need k >= 0 and t_off > 0")

    def psi(self, t):
        t = np.asarray(t, dtype=float)
        return np.where(t < self.t_off, np.cos(0.5 * np.pi * t / self.t_off) ** 2, 0.0)

    def dpsi(self, t):
        t = np.asarray(t, dtype=float)
        a = 0.5 * np.pi / self.t_off
        return np.where(t < self.t_off, -a * np.sin(2.0 * a * t), 0.0)

    def space(self, x, order: int = 0):
        w = self.k * np.pi / self.L
        return w**order * np.cos(w * np.asarray(x, dtype=float) + order * np.pi / 2)

    def phi(self, t, x):
        return self.psi(t) * self.space(x)


def _hat_weights(times, g):
    """W_k = int g(t) h_k(t) dt for the piecewise-linear hat functions h_k on ``times``."""
    W = np.zeros(times.size)
    for k in range(times.size - 1):
        a, b = times[k], times[k + 1]
        s = 0.5 * (_GAUSS_X + 1.0)
        t = a + (b - a) * s
        gw = g(t) * _GAUSS_W * 0.5 * (b - a)
        W[k] += np.sum(gw * (1.0 - s))
        W[k + 1] += np.sum(gw * s)
    return W


def weak_terms(traj, tf: TestFunction, species: int) -> dict:
    """The weak-form integrals for one species, ρ linear in time between snapshots."""
    if len(traj.states) < MIN_SNAPSHOTS:
        raise WeakCheckError(f"need at least {MIN_SNAPSHOTS} snapshots, got {len(traj.states)}")
    c = traj.config
    grid, law, pots = c.grid, c.law, c.potentials
    if abs(tf.L - grid.L) > 1e-12:
        raise WeakCheckError("test function and grid disagree on L")
    x, xf, dx = grid.centers, grid.faces[1:-1], grid.dx
    times = traj.times
    V = pots.V1 if species == 1 else pots.V2
    phi0 = tf.space(x)
    dphi_f = tf.space(xf, 1)
    d2phi = tf.space(x, 2)
    cols = {key: [] for key in ("mass", "visc", "flux", "abs_mass", "abs_visc", "abs_flux")}
    for s in traj.states:
        rho = s.rho1 if species == 1 else s.rho2
        sigma = np.maximum(s.rho1 + s.rho2, S_FLOOR)
        drive = np.diff(np.asarray(eval_fprime(law, sigma)) + V) / dx
        rho_f = 0.5 * (rho[1:] + rho[:-1])
        for key, dens in (("mass", rho * phi0), ("visc", rho * d2phi), ("flux", rho_f * drive * dphi_f)):
            cols[key].append(np.sum(dens) * dx)
            cols["abs_" + key].append(np.sum(np.abs(dens)) * dx)
    w_psi = _hat_weights(times, tf.psi)
    w_dpsi = _hat_weights(times, tf.dpsi)
    abs_dpsi = _hat_weights(times, lambda t: np.abs(tf.dpsi(t)))
    return {
        "initial": float(cols["mass"][0] * tf.psi(0.0)),
        "time": float(np.dot(w_dpsi, cols["mass"])),
        "viscous": float(c.eta * np.dot(w_psi, cols["visc"])),
        "flux": float(np.dot(w_psi, cols["flux"])),
        # magnitudes: the same integrals with absolute integrands
        "initial_abs": float(cols["abs_mass"][0] * tf.psi(0.0)),
        "time_abs": float(np.dot(abs_dpsi, cols["abs_mass"])),
        "viscous_abs": float(c.eta * np.dot(w_psi, cols["abs_visc"])),
        "flux_abs": float(np.dot(w_psi, cols["abs_flux"])),
    }


def weak_residual(traj, tf: TestFunction, species: int, viscous_correction: bool = True) -> float:
    """|LHS - RHS| of the weak form over the largest term magnitude (0 if all vanish).

    A term's magnitude is its integral with the integrand replaced by its
    absolute value, so modes in which the signed integrals nearly cancel do
    not inflate the relative residual.
    """
    if species not in (1, 2):
        raise ValueError("species must be 1 or 2")
    T = weak_terms(traj, tf, species)
    lhs = T["initial"] + T["time"] + (T["viscous"] if viscous_correction else 0.0)
    names = ["initial", "time", "flux"] + (["viscous"] if viscous_correction else [])
    scale = max(T[k + "_abs"] for k in names)
    if scale == 0.0:
        return 0.0
    return abs(lhs - T["flux"]) / scale


def max_mode_residual(traj, mode_count: int = 8, t_off: Optional[float] = None,
                      viscous_correction: bool = False) -> float:
    t_off = traj.config.T if t_off is None else t_off
    L = traj.config.grid.L
    return max(
        weak_residual(traj, TestFunction(k, t_off, L), sp, viscous_correction)
        for k in range(mode_count + 1)
        for sp in (1, 2)
    )


@dataclass
class SweepTable:
    rows: list  # (eta, n, mode, residual)
    diagonal: list  # (eta, n, max residual)

    @property
    def decreasing(self) -> bool:
        vals = [d[2] for d in self.diagonal]
        return all(b < a for a, b in zip(vals, vals[1:]))

    def verdict(self) -> str:
        return "PASS" if self.decreasing else "FAIL"


def residual_sweep(scenario: Callable, eta_list: Sequence[float], n_list: Sequence[int],
                   mode_count: int = 8, viscous_correction: bool = False) -> SweepTable:
    """Weak residuals along the joint refinement (eta_k, n_k).

    ``scenario(eta, n)`` must return a trajectory.  Residuals default to the
    limit (inviscid) weak form, so each entry mixes discretisation error with
    the O(eta) viscous defect.
    """
    if not eta_list or len(eta_list) != len(n_list):
        raise WeakCheckError("eta and grid lists must be nonempty and of equal length")
    rows, diag = [], []
    for eta, n in zip(eta_list, n_list):
        traj = scenario(eta, n)
        L = traj.config.grid.L
        best = 0.0
        for k in range(mode_count + 1):
            tf = TestFunction(k, traj.config.T, L)
            r = max(weak_residual(traj, tf, sp, viscous_correction) for sp in (1, 2))
            rows.append((float(eta), int(n), k, r))
            best = max(best, r)
        diag.append((float(eta), int(n), best))
    return SweepTable(rows, diag)


def _to_grid(values, x_from, x_to):
    return np.interp(x_to, x_from, values)


def l1_distance(traj_a, traj_b) -> float:
    """||rho^a - rho^b||_{L1([0,T] x Omega)} summed over species, on the finer grid.

    Both trajectories must share their snapshot times; the time integral uses the trapezoid rule.
    """
    ta, tb = traj_a.times, traj_b.times
    if ta.shape != tb.shape or np.max(np.abs(ta - tb)) > 1e-12:
        raise WeakCheckError("trajectories must share snapshot times")
    fine, coarse = (traj_a, traj_b) if traj_a.grid.n >= traj_b.grid.n else (traj_b, traj_a)
    xf, xc = fine.grid.centers, coarse.grid.centers
    per_t = []
    for sf, sc in zip(fine.states, coarse.states):
        d = 0.0
        for a, b in ((sf.rho1, sc.rho1), (sf.rho2, sc.rho2)):
            d += np.sum(np.abs(a - _to_grid(b, xc, xf))) * fine.grid.dx
        per_t.append(d)
    return float(np.trapezoid(per_t, ta))


def l1_cauchy(scenario: Callable, eta_list: Sequence[float], n_list: Optional[Sequence[int]] = None) -> list:
    """Distances between consecutive members of an eta sequence: [(eta_k, eta_{k+1}, distance)]."""
    n_list = list(n_list) if n_list is not None else [None] * len(eta_list)
    trajs = [scenario(eta, n) for eta, n in zip(eta_list, n_list)]
    return [
        (float(eta_list[k]), float(eta_list[k + 1]), l1_distance(trajs[k], trajs[k + 1]))
        for k in range(len(trajs) - 1)
    ]


def grad_g_stability(trajs: Iterable) -> list:
    """Time-sup of ||sigma d_x f'(sigma)||_1 per trajectory (the d_x g(sigma) in L1 check)."""
    return [max(r.grad_g_L1 for r in t.records) for t in trajs]
