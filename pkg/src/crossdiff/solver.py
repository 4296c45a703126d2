"""Explicit conservative finite-volume solver for the viscous two-species system

    d_t rho_i = eta d_xx rho_i + d_x(rho_i d_x(f'(rho_1 + rho_2) + V_i)),   i = 1, 2,

with zero total flux through both walls.

Face fluxes use the Scharfetter-Gummel form

    J_{j+1/2} = (A(w) rho_j - A(-w) rho_{j+1}) / dx,   A(w) = w / (exp(w / eta) - 1),

where w = (f'(sigma_{j+1}) + V_{j+1}) - (f'(sigma_j) + V_j).  At eta = 0 this is
the first-order upwind flux.  The form is positivity preserving under the
step restriction in :func:`cfl_dt` and each face flux has the sign opposite
to the jump of the chemical potential f'(sigma) + V_i + eta log rho_i, so the
discrete energy is dissipated face by face.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import _kernels as K
from .grid import Grid1D, Potentials, State
from .initdata import VACUUM_EPS, InitialData, build_ratio
from .pressure import LOGARITHMIC, POWER, S_FLOOR, PressureLaw, eval_fprime, eval_fsecond
from .xi import XiEvaluator

logger = logging.getLogger(__name__)

MAX_DEFICIT = 1e-8


class SchemeFailure(RuntimeError):
    def __init__(self, message: str, t: float):
        super().__init__(f"{message} (t={t:.6g})")
        self.t = t


class StateError(ValueError):
    pass


@dataclass
class RunConfig:
    grid: Grid1D
    law: PressureLaw
    eta: float
    potentials: Potentials
    initial: InitialData
    T: float
    cfl_safety: float = 0.4
    output_every: Optional[float] = None
    source: Optional[Callable] = None
    xi_tail_cutoff: float = 40.0
    xi_quad_tol: float = 1e-10
    max_deficit: float = MAX_DEFICIT
    use_compiled: Optional[bool] = None
    diagnostics: bool = True
    p_list: tuple = (2.0,)
    theta: float = 0.5
    log_energy: bool = True

    def __post_init__(self):
        errors = []
        if not 0.0 < self.eta <= 1.0:
            errors.append("eta must lie in (0, 1]")
        if not self.T >= 0.0:
            errors.append("T must be non-negative")
        if not 0.0 < self.cfl_safety < 1.0:
            errors.append("cfl_safety must lie in (0, 1)")
        if self.output_every is not None and not self.output_every > 0:
            errors.append("output_every must be positive")
        if self.initial.grid != self.grid:
            errors.append("initial data lives on a different grid")
        if self.potentials.V1.shape != (self.grid.n,):
            errors.append("potentials do not match the grid")
        if errors:
            raise ValueError("; ".join(errors))

    def output_times(self) -> np.ndarray:
        if self.T == 0.0:
            return np.zeros(1)
        if self.output_every is None:
            return np.array([0.0, self.T])
        m = int(np.floor(self.T / self.output_every + 1e-9))
        ts = self.output_every * np.arange(m + 1)
        if self.T - ts[-1] > 1e-12 * self.T:
            ts = np.append(ts, self.T)
        else:
            ts[-1] = self.T
        return ts

    def swapped(self) -> "RunConfig":
        """The same problem with the two species (densities and potentials) exchanged."""
        init = InitialData(self.grid, self.initial.rho2.copy(), self.initial.rho1.copy(),
                           build_ratio(self.initial.rho2, self.initial.rho1),
                           self.initial.provenance, self.initial.eta, dict(self.initial.info))
        src = None
        if self.source is not None:
            orig = self.source
            src = lambda t, x: tuple(reversed(orig(t, x)))  # noqa: E731
        return RunConfig(self.grid, self.law, self.eta, self.potentials.swapped(), init, self.T,
                         self.cfl_safety, self.output_every, src, self.xi_tail_cutoff, self.xi_quad_tol,
                         self.max_deficit, self.use_compiled, self.diagnostics, self.p_list, self.theta,
                         self.log_energy)


# -- transformed variables ----------------------------------------------------

def transform(state: State):
    """(sigma, r) with sigma = rho1 + rho2 and r the nearest-fill ratio."""
    return state.rho1 + state.rho2, build_ratio(state.rho1, state.rho2)


def log_omega(sigma, pots: Potentials, law: PressureLaw, eta: float, evaluator: Optional[XiEvaluator] = None):
    """log omega at cell centres, anchored at 0 in the first cell.

    log omega_{j+1} - log omega_j = -(dV_{j+1} - dV_j) (xi_eta(sigma_j) + xi_eta(sigma_{j+1})) / 2,
    with dV = V1 - V2, i.e. the trapezoid rule for -int d_x(V1 - V2) xi_eta(sigma).
    """
    sigma = np.asarray(sigma, dtype=float)
    if np.any(~(sigma > 0)):
        bad = int(np.flatnonzero(~(sigma > 0))[0])
        raise StateError(f"sigma must be positive on every cell (cell {bad})")
    dV = pots.V1 - pots.V2
    incr = np.diff(dV)
    if not np.any(incr):
        return np.zeros_like(sigma)
    ev = evaluator if evaluator is not None else XiEvaluator(law, eta)
    xe = np.asarray(ev.xi_eta(np.maximum(sigma, S_FLOOR)), dtype=float)
    steps = -incr * 0.5 * (xe[1:] + xe[:-1])
    return np.concatenate(([0.0], np.cumsum(steps)))


def omega_phi(state: State, pots: Potentials, law: PressureLaw, eta: float,
              evaluator: Optional[XiEvaluator] = None):
    """omega and the inhomogeneous ratio phi = r omega / ((1 - r) + r omega)."""
    sigma, r = transform(state)
    lw = log_omega(sigma, pots, law, eta, evaluator)
    omega = np.exp(lw)
    # a / (a + b) with a, b >= 0 never rounds above 1; omega == 1 keeps phi = r exactly
    a = r * omega
    phi = np.where(omega == 1.0, r, a / ((1.0 - r) + a))
    return omega, phi


# -- fluxes and steps ---------------------------------------------------------

def mobility_pair(w, eta: float):
    """(A(w), A(-w)) elementwise with A(w) = w / expm1(w / eta); upwind max(-w, 0) when eta = 0.

    The smaller member comes from one expm1 and the larger one from A(-w) = A(w) + w.
    """
    w = np.asarray(w, dtype=float)
    aw = np.abs(w)
    if eta == 0.0:
        small = np.zeros_like(aw)
    else:
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            z = aw / eta
            small = np.where(z > 700.0, 0.0, aw / np.expm1(np.minimum(z, 700.0)))
        small = np.where(w == 0.0, eta, small)
    big = np.where(w == 0.0, small, small + aw)
    pos = w > 0
    return np.where(pos, small, big), np.where(pos, big, small)


def mobility(w, eta: float):
    return mobility_pair(w, eta)[0]


def _fprime_cells(law: PressureLaw, sigma):
    fp = np.asarray(eval_fprime(law, np.maximum(sigma, S_FLOOR)), dtype=float)
    if not np.all(np.isfinite(fp)):
        j = int(np.flatnonzero(~np.isfinite(fp))[0])
        raise FloatingPointError(f"non-finite f'(sigma) in cell {j}")
    return fp


def _flux_arrays(rho1, rho2, V1, V2, fp, eta, dx):
    n = rho1.size
    J1 = np.zeros(n + 1)
    J2 = np.zeros(n + 1)
    dfp = np.diff(fp)
    w1 = dfp + np.diff(V1)
    w2 = dfp + np.diff(V2)
    a1, b1 = mobility_pair(w1, eta)
    a2, b2 = mobility_pair(w2, eta)
    J1[1:-1] = (a1 * rho1[:-1] - b1 * rho1[1:]) / dx
    J2[1:-1] = (a2 * rho2[:-1] - b2 * rho2[1:]) / dx
    return J1, J2, w1, w2


def face_flux(state: State, pots: Potentials, law: PressureLaw, eta: float, grid: Grid1D):
    """Fluxes J_1, J_2 on the n + 1 faces (positive means rightward); wall faces are zero."""
    fp = _fprime_cells(law, state.rho1 + state.rho2)
    J1, J2, _, _ = _flux_arrays(state.rho1, state.rho2, pots.V1, pots.V2, fp, eta, grid.dx)
    return J1, J2


def rhs(rho1, rho2, pots: Potentials, law: PressureLaw, eta: float, grid: Grid1D):
    """Semi-discrete time derivatives -(J_{j+1/2} - J_{j-1/2}) / dx."""
    fp = _fprime_cells(law, np.asarray(rho1) + np.asarray(rho2))
    J1, J2, _, _ = _flux_arrays(np.asarray(rho1, float), np.asarray(rho2, float), pots.V1, pots.V2, fp, eta, grid.dx)
    return -np.diff(J1) / grid.dx, -np.diff(J2) / grid.dx


def _dt_bound(sigma, w1, w2, law, eta, dx):
    sf2 = np.max(np.maximum(sigma, S_FLOOR) * np.asarray(eval_fsecond(law, np.maximum(sigma, S_FLOOR))))
    bound = dx * dx / (2.0 * (eta + sf2))
    out1 = np.zeros(sigma.size)
    out2 = np.zeros(sigma.size)
    a1, b1 = mobility_pair(w1, eta)
    a2, b2 = mobility_pair(w2, eta)
    out1[:-1] += a1
    out1[1:] += b1
    out2[:-1] += a2
    out2[1:] += b2
    out = max(out1.max(), out2.max())
    if out > 0:
        bound = min(bound, dx * dx / out)
    wmax = max(np.max(np.abs(w1)), np.max(np.abs(w2))) if w1.size else 0.0
    if wmax > 0:
        bound = min(bound, dx * dx / wmax)
    return bound


def cfl_dt(state: State, pots: Potentials, law: PressureLaw, eta: float, grid: Grid1D, safety: float = 0.4) -> float:
    """Largest stable explicit step times ``safety``.

    min(dx^2 / (2 (eta + max sigma f''(sigma))), dx / max|u|, dx^2 / max outflow coefficient),
    with u = w / dx the face drift speed; the last bound keeps every diagonal
    coefficient of the update non-negative.
    """
    sigma = state.rho1 + state.rho2
    fp = _fprime_cells(law, sigma)
    _, _, w1, w2 = _flux_arrays(state.rho1, state.rho2, pots.V1, pots.V2, fp, eta, grid.dx)
    return safety * _dt_bound(sigma, w1, w2, law, eta, grid.dx)


@dataclass
class StepInfo:
    clipped: int = 0
    deficit: float = 0.0


def _clip(rho, dx):
    neg = rho < 0
    if not neg.any():
        return rho, 0, 0.0
    before = rho.sum()
    deficit = float(-rho[neg].sum())
    out = np.where(neg, 0.0, rho)
    out *= before / out.sum()
    return out, int(neg.sum()), deficit * dx


def _advance(state, dt, J1, J2, grid, source, max_deficit):
    r = dt / grid.dx
    rho1 = state.rho1 - r * np.diff(J1)
    rho2 = state.rho2 - r * np.diff(J2)
    if source is not None:
        s1, s2 = source(state.t, grid.centers)
        rho1 = rho1 + dt * s1
        rho2 = rho2 + dt * s2
    rho1, c1, d1 = _clip(rho1, grid.dx)
    rho2, c2, d2 = _clip(rho2, grid.dx)
    info = StepInfo(c1 + c2, max(d1, d2))
    if info.clipped:
        logger.debug("clipped %d negative cells at t=%g (deficit %.3g)", info.clipped, state.t, info.deficit)
    if info.deficit > max_deficit:
        raise SchemeFailure(f"post-clip mass deficit {info.deficit:.3g}", state.t + dt)
    if not (np.all(np.isfinite(rho1)) and np.all(np.isfinite(rho2))):
        raise SchemeFailure("non-finite density", state.t + dt)
    return State(state.t + dt, rho1, rho2), info


def step(state: State, dt: float, pots: Potentials, law: PressureLaw, eta: float, grid: Grid1D,
         source: Optional[Callable] = None, max_deficit: float = MAX_DEFICIT) -> tuple[State, StepInfo]:
    """One forward Euler step of the conservative update (plus an optional source term)."""
    fp = _fprime_cells(law, state.rho1 + state.rho2)
    J1, J2, _, _ = _flux_arrays(state.rho1, state.rho2, pots.V1, pots.V2, fp, eta, grid.dx)
    return _advance(state, dt, J1, J2, grid, source, max_deficit)


def energy_and_dissipation(state: State, pots: Potentials, law: PressureLaw, eta: float, grid: Grid1D):
    from .diagnostics import dissipation_D, energy_F

    return energy_F(state, pots, law, eta, grid), dissipation_D(state, pots, law, eta, grid)


# -- trajectories -------------------------------------------------------------

@dataclass
class StepLog:
    """Per-step record: start time, step size, energy and dissipation at the start, clipped cells."""

    t: np.ndarray
    dt: np.ndarray
    energy: np.ndarray
    dissipation: np.ndarray
    clipped: np.ndarray
    final_energy: float
    worst_deficit: float

    @property
    def steps(self) -> int:
        return int(self.t.size)

    def energy_increments(self) -> np.ndarray:
        e = np.append(self.energy, self.final_energy)
        return np.diff(e)


@dataclass
class Trajectory:
    config: RunConfig
    states: list
    log: StepLog
    records: list = field(default_factory=list)
    _evaluator: Optional[XiEvaluator] = field(default=None, repr=False)

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.states])

    @property
    def grid(self) -> Grid1D:
        return self.config.grid

    def evaluator(self) -> XiEvaluator:
        if self._evaluator is None:
            c = self.config
            self._evaluator = XiEvaluator(c.law, c.eta, c.xi_tail_cutoff, c.xi_quad_tol)
        return self._evaluator

    def omega_phi(self, k: int):
        c = self.config
        return omega_phi(self.states[k], c.potentials, c.law, c.eta, self.evaluator())

    def density_stack(self, species: int) -> np.ndarray:
        return np.array([s.rho1 if species == 1 else s.rho2 for s in self.states])


def _compiled_ok(config: RunConfig) -> bool:
    if config.use_compiled is False:
        return False
    ok = config.source is None and config.law.kind in (POWER, LOGARITHMIC)
    if config.use_compiled and not ok:
        raise ValueError("the compiled path supports only power/logarithmic laws without sources")
    return ok


def run(config: RunConfig) -> Trajectory:
    """Advance the initial data to T, storing a snapshot at every output time."""
    grid, law, eta, pots = config.grid, config.law, config.eta, config.potentials
    rho1 = config.initial.rho1.astype(float).copy()
    rho2 = config.initial.rho2.astype(float).copy()
    if np.any(rho1 + rho2 <= VACUUM_EPS):
        logger.warning("initial aggregate density has vacuum cells; omega/phi are undefined there")
    times = config.output_times()
    states = [State(0.0, rho1.copy(), rho2.copy())]
    logs = {k: [] for k in ("t", "dt", "energy", "dissipation", "clipped")}
    worst = 0.0
    if _compiled_ok(config):
        kind = K.LAW_POWER if law.kind == POWER else K.LAW_LOG
        alpha = float(law.alpha) if law.kind == POWER else 1.0
        cap = 4096
        buf = [np.empty(cap) for _ in range(4)] + [np.zeros(cap, dtype=np.int64)]
        t = 0.0
        for t_out in times[1:]:
            while True:
                status, t, used, w = K.advance(
                    rho1, rho2, pots.V1, pots.V2, kind, alpha, float(law.lam), float(eta), grid.dx,
                    t, float(t_out), config.cfl_safety, config.max_deficit, *buf, 0,
                )
                worst = max(worst, w)
                for key, arr in zip(logs, buf):
                    logs[key].append(arr[:used].copy())
                if status == K.BUFFER_FULL:
                    continue
                if status == K.SCHEME_FAILURE:
                    raise SchemeFailure(f"post-clip mass deficit {w:.3g}", t)
                if status == K.NONFINITE:
                    raise SchemeFailure("non-finite density or step size", t)
                break
            t = float(t_out)
            states.append(State(t, rho1.copy(), rho2.copy()))
        final_e, _ = K.energy_dissipation(rho1, rho2, pots.V1, pots.V2, kind, alpha, float(law.lam), float(eta), grid.dx)
    else:
        from .diagnostics import dissipation_D, energy_F

        state = states[0].copy()
        for t_out in times[1:]:
            while state.t < t_out:
                sigma = state.rho1 + state.rho2
                fp = _fprime_cells(law, sigma)
                J1, J2, w1, w2 = _flux_arrays(state.rho1, state.rho2, pots.V1, pots.V2, fp, eta, grid.dx)
                dt = config.cfl_safety * _dt_bound(sigma, w1, w2, law, eta, grid.dx)
                last = state.t + dt >= t_out or t_out - (state.t + dt) < 1e-12 * dt
                if last:
                    dt = t_out - state.t
                logs["t"].append([state.t])
                logs["dt"].append([dt])
                if config.log_energy:
                    logs["energy"].append([energy_F(state, pots, law, eta, grid)])
                    logs["dissipation"].append([dissipation_D(state, pots, law, eta, grid)])
                else:
                    logs["energy"].append([np.nan])
                    logs["dissipation"].append([np.nan])
                state, info = _advance(state, dt, J1, J2, grid, config.source, config.max_deficit)
                if last:
                    state.t = float(t_out)
                logs["clipped"].append([info.clipped])
                worst = max(worst, info.deficit)
            states.append(state.copy())
        final_e = energy_F(state, pots, law, eta, grid)
    cat = {k: (np.concatenate(v) if v else np.empty(0)) for k, v in logs.items()}
    log = StepLog(cat["t"], cat["dt"], cat["energy"], cat["dissipation"], cat["clipped"].astype(int),
                  float(final_e), worst)
    traj = Trajectory(config, states, log)
    if config.diagnostics:
        from .diagnostics import record_trajectory

        record_trajectory(traj)
    return traj
