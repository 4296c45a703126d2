"""Manufactured solutions for verifying the discretisation.

Exact profiles rho_i(t, x) = 1 + a_i cos(k_i pi x / L) exp(-t) have zero
slope at both walls, so with wall-flat potentials the no-flux condition holds
and the masses stay at L.  The source S_i = d_t rho_i - eta d_xx rho_i
- d_x(rho_i d_x(f'(sigma) + V_i)) is added to the scheme.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import Grid1D, PotentialSpec, Potentials
from .initdata import InitialData, build_ratio
from .pressure import PressureLaw, eval_fsecond, eval_fthird
from .solver import RunConfig, run


@dataclass
class ManufacturedSolution:
    law: PressureLaw
    eta: float = 0.1
    L: float = 1.0
    amplitudes: tuple = (0.3, -0.2)
    modes: tuple = (1, 2)
    V1: PotentialSpec = field(default_factory=lambda: PotentialSpec.cosine([0.1]))
    V2: PotentialSpec = field(default_factory=lambda: PotentialSpec.cosine([-0.1]))

    def density(self, i: int, t, x, order: int = 0):
        """d^order/dx^order of rho_i at (t, x)."""
        a, k = self.amplitudes[i - 1], self.modes[i - 1]
        w = k * np.pi / self.L
        x = np.asarray(x, dtype=float)
        out = a * np.exp(-t) * w**order * np.cos(w * x + order * np.pi / 2)
        return out + 1.0 if order == 0 else out

    def source(self, t, x):
        s0 = self.density(1, t, x) + self.density(2, t, x)
        s1 = self.density(1, t, x, 1) + self.density(2, t, x, 1)
        s2 = self.density(1, t, x, 2) + self.density(2, t, x, 2)
        f2 = np.asarray(eval_fsecond(self.law, s0))
        f3 = np.asarray(eval_fthird(self.law, s0))
        out = []
        for i, V in ((1, self.V1), (2, self.V2)):
            rho = self.density(i, t, x)
            d1 = self.density(i, t, x, 1)
            d2 = self.density(i, t, x, 2)
            dt = rho - 1.0  # time factor exp(-t) differentiates to minus itself
            drift = d1 * (f2 * s1 + V(x, 1)) + rho * (f3 * s1**2 + f2 * s2 + V(x, 2))
            out.append(-dt - self.eta * d2 - drift)
        return out[0], out[1]

    def config(self, n: int, T: float, safety: float = 0.4) -> RunConfig:
        grid = Grid1D(self.L, n)
        x = grid.centers
        r1, r2 = self.density(1, 0.0, x), self.density(2, 0.0, x)
        init = InitialData(grid, r1, r2, build_ratio(r1, r2), provenance="manufactured")
        pots = Potentials.from_specs(self.V1, self.V2, grid)
        return RunConfig(grid, self.law, self.eta, pots, init, T, cfl_safety=safety,
                         source=self.source, diagnostics=False, log_energy=False)

    def l1_error(self, n: int, T: float = 0.1, safety: float = 0.4) -> float:
        traj = run(self.config(n, T, safety))
        grid = traj.grid
        x, end = grid.centers, traj.states[-1]
        err = np.abs(end.rho1 - self.density(1, T, x)) + np.abs(end.rho2 - self.density(2, T, x))
        return float(np.sum(err) * grid.dx)


def convergence_study(mms: ManufacturedSolution, n_list=(64, 128, 256), T: float = 0.1):
    """L1 errors at T and the least-squares slope of log(error) against log(dx)."""
    errors = np.array([mms.l1_error(n, T) for n in n_list])
    dx = mms.L / np.asarray(n_list, dtype=float)
    slope = float(np.polyfit(np.log(dx), np.log(errors), 1)[0])
    return errors, slope
