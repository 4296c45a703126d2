"""Ratio construction, presets, and the eta-indexed smoothing of initial data and potentials."""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .grid import Grid1D, PotentialSpec, Potentials
from .pressure import PressureLaw, eval_fprime, eval_fsecond

logger = logging.getLogger(__name__)

VACUUM_EPS = 1e-14
PRESETS = ("uniform", "segregated_step", "mixed_gaussians", "partial_overlap")
COLLAR_MODES = ("extend", "fixed")
COMPAT_TOL = 1e-10


class InitialDataError(ValueError):
    pass


@dataclass
class InitialData:
    grid: Grid1D
    rho1: np.ndarray
    rho2: np.ndarray
    r: np.ndarray
    provenance: str = "raw"
    eta: Optional[float] = None
    info: dict = field(default_factory=dict)

    @property
    def sigma(self) -> np.ndarray:
        return self.rho1 + self.rho2

    @classmethod
    def from_densities(cls, grid: Grid1D, rho1, rho2, normalize: bool = True) -> "InitialData":
        rho1 = np.asarray(rho1, dtype=float).copy()
        rho2 = np.asarray(rho2, dtype=float).copy()
        if rho1.shape != (grid.n,) or rho2.shape != (grid.n,):
            raise InitialDataError("densities must have one value per cell")
        if np.any(rho1 < 0) or np.any(rho2 < 0) or not np.all(np.isfinite(rho1 + rho2)):
            raise InitialDataError("densities must be finite and non-negative")
        if normalize:
            for rho in (rho1, rho2):
                m = grid.mass(rho)
                if m <= 0:
                    raise InitialDataError("each species needs positive mass")
                rho /= m
        return cls(grid, rho1, rho2, build_ratio(rho1, rho2))


def build_ratio(rho1, rho2, vacuum_eps: float = VACUUM_EPS) -> np.ndarray:
    """r with r (rho1 + rho2) = rho1 off vacuum; vacuum cells copy the nearest occupied cell.

    Ties between equally distant occupied cells go to the left neighbour.
    """
    rho1 = np.asarray(rho1, dtype=float)
    sigma = rho1 + np.asarray(rho2, dtype=float)
    occupied = sigma > vacuum_eps
    r = np.full(sigma.shape, 0.5)
    r[occupied] = rho1[occupied] / sigma[occupied]
    if occupied.all() or not occupied.any():
        return r
    idx = np.flatnonzero(occupied)
    holes = np.flatnonzero(~occupied)
    pos = np.searchsorted(idx, holes)
    left = idx[np.clip(pos - 1, 0, idx.size - 1)]
    right = idx[np.clip(pos, 0, idx.size - 1)]
    dl = np.where(pos > 0, holes - left, np.iinfo(np.int64).max)
    dr = np.where(pos < idx.size, right - holes, np.iinfo(np.int64).max)
    r[holes] = r[np.where(dl <= dr, left, right)]
    return r


def discrete_tv(u) -> float:
    return float(np.sum(np.abs(np.diff(np.asarray(u, dtype=float)))))


# -- presets ------------------------------------------------------------------

def preset_densities(name: str, grid: Grid1D) -> tuple[np.ndarray, np.ndarray]:
    """Raw (unnormalised) density profiles for the named preset."""
    x, L = grid.centers, grid.L
    if name == "uniform":
        return np.ones(grid.n), np.ones(grid.n)
    if name == "segregated_step":
        left = (x < 0.5 * L).astype(float)
        return left, 1.0 - left
    if name == "mixed_gaussians":
        # overlapping bumps kept clear of the widest smoothing collars used in sweeps
        w = 0.05 * L
        g1 = np.exp(-0.5 * ((x - 0.45 * L) / w) ** 2)
        g2 = np.exp(-0.5 * ((x - 0.55 * L) / w) ** 2)
        return g1, g2
    if name == "partial_overlap":
        rho1 = (x < 0.6 * L).astype(float)
        rho2 = (x > 0.4 * L).astype(float)
        return rho1, rho2
    raise InitialDataError(f"unknown preset {name!r}; expected one of {PRESETS}")


def preset_potentials(name: str, L: float = 1.0, amplitude: float = 0.2) -> tuple[PotentialSpec, PotentialSpec]:
    """Default drifts per preset: none for ``uniform``, opposite cosine drifts otherwise."""
    if name == "uniform":
        return PotentialSpec.zero(L), PotentialSpec.zero(L)
    return PotentialSpec.cosine([amplitude], L), PotentialSpec.cosine([-amplitude], L)


def load_preset(name: str, grid: Grid1D) -> InitialData:
    rho1, rho2 = preset_densities(name, grid)
    data = InitialData.from_densities(grid, rho1, rho2)
    data.provenance = "raw"
    data.info["preset"] = name
    return data


def load_csv(path, grid: Grid1D) -> InitialData:
    """Cell-centre samples with columns x, rho1, rho2, linearly resampled and renormalised."""
    table = np.genfromtxt(path, delimiter=",", names=True)
    missing = {"x", "rho1", "rho2"} - set(table.dtype.names or ())
    if missing:
        raise InitialDataError(f"initial-data CSV lacks columns {sorted(missing)}")
    order = np.argsort(table["x"])
    xs = table["x"][order]
    rho1 = np.interp(grid.centers, xs, table["rho1"][order])
    rho2 = np.interp(grid.centers, xs, table["rho2"][order])
    return InitialData.from_densities(grid, np.clip(rho1, 0, None), np.clip(rho2, 0, None))


# -- mollification ------------------------------------------------------------

def kernel_weights(width: float, dx: float) -> np.ndarray:
    """Discrete cosine bump (1 + cos(pi x / width)) on (-width, width), unit sum."""
    m = int(np.ceil(width / dx)) - 1
    if m < 1:
        return np.ones(1)
    k = np.arange(-m, m + 1) * dx
    w = 1.0 + np.cos(np.pi * k / width)
    return w / w.sum()


def _convolve_edge(u, w):
    m = (w.size - 1) // 2
    if m == 0:
        return u.copy()
    padded = np.pad(u, m, mode="edge")
    return np.convolve(padded, w, mode="valid")


def mollifier_width(eta: float, slow: bool = False) -> float:
    return float(np.sqrt(eta)) if slow else float(eta)


def mollify_initial(data: InitialData, eta: float, collar: str = "extend", slow: bool = False) -> InitialData:
    """Smooth, strictly positive, boundary-flat approximation of the initial data.

    The pipeline floors sigma at eta, makes both sigma and r constant on the
    3h collars next to each wall (h the mollifier width), mollifies, resets the
    inner h collar, normalises sigma to total mass 2 and finally fixes the mass
    of rho1 by blending r towards 1 (or 0).  With ``collar="fixed"`` the collar
    values are (sigma, r) = (1, 0); ``"extend"`` copies the nearest interior
    value instead, which leaves flat data untouched.
    """
    grid = data.grid
    L, x = grid.L, grid.centers
    h = mollifier_width(eta, slow)
    if not 0.0 < eta <= 1.0 or h > L / 8:
        raise InitialDataError(f"eta={eta} too large for a domain of length {L}")
    if collar not in COLLAR_MODES:
        raise InitialDataError(f"collar must be one of {COLLAR_MODES}")
    sigma0 = data.sigma
    inner = (x > 3 * h) & (x < L - 3 * h)
    if not inner.any():
        raise InitialDataError("no interior cells outside the collars")
    first, last = np.flatnonzero(inner)[[0, -1]]
    src = np.clip(np.arange(grid.n), first, last)
    floor_cells = int(np.count_nonzero(sigma0[inner] < eta))

    if collar == "fixed":
        s_hat = np.where(inner, np.maximum(sigma0, eta), 1.0)
        r_hat = np.where(inner, data.r, 0.0)
    else:
        s_hat = np.maximum(sigma0[src], eta)
        r_hat = data.r[src]
    tv_hat = discrete_tv(r_hat)

    w = kernel_weights(h, grid.dx)
    s_t = _convolve_edge(s_hat, w)
    r_t = np.clip(_convolve_edge(r_hat, w), 0.0, 1.0)
    edge = (x <= h) | (x >= L - h)
    s_t[edge] = s_hat[edge]
    r_t[edge] = r_hat[edge]

    sigma = 2.0 * s_t / grid.mass(s_t)
    c1 = grid.mass(sigma * r_t)
    # blend r towards 1 (c1 < 1) or 0 (c1 > 1) so that rho1 has unit mass and r stays in [0, 1]
    if c1 < 1.0:
        theta = (1.0 - c1) / (2.0 - c1)
        r = r_t + theta * (1.0 - r_t)
    else:
        theta = 1.0 - 1.0 / c1
        r = (1.0 - theta) * r_t
    rho1 = sigma * r
    rho2 = sigma - rho1
    rho2 = np.clip(rho2, 0.0, None)
    rho1 /= grid.mass(rho1)
    rho2 /= grid.mass(rho2)
    out = InitialData(grid, rho1, rho2, build_ratio(rho1, rho2), provenance=f"mollified({eta:g})", eta=eta)
    out.info.update(
        collar=collar,
        width=h,
        c1=c1,
        blend=theta,
        tv_factor=1.0 - theta if c1 >= 1.0 else 1.0,
        tv_hat=tv_hat,
        tv_input=discrete_tv(data.r),
        sigma_floor=float(eta * 2.0 / grid.mass(s_t)),
        floor_cells=floor_cells,
    )
    if floor_cells:
        logger.info("sigma floor eta=%g active on %d cells", eta, floor_cells)
    return out


def mollify_potentials(V1, V2, eta: float, grid: Grid1D, slow: bool = False) -> Potentials:
    """Smooth potentials that are exactly flat on the h collars (zero wall slope).

    V1, V2 are PotentialSpec instances, callables, or arrays of cell-centre samples.
    """
    h = mollifier_width(eta, slow)
    if h > grid.L / 8:
        raise InitialDataError(f"eta={eta} too large for a domain of length {grid.L}")
    x = grid.centers
    xc = np.clip(x, 2 * h, grid.L - 2 * h)
    w = kernel_weights(h, grid.dx)
    edge_left, edge_right = x <= h, x >= grid.L - h
    out = []
    for V in (V1, V2):
        if callable(V):
            vals = np.asarray(V(xc), dtype=float)
            wall = np.asarray(V(np.array([2 * h, grid.L - 2 * h])), dtype=float)
        else:
            arr = np.asarray(V, dtype=float)
            vals = np.interp(xc, x, arr)
            wall = np.interp([2 * h, grid.L - 2 * h], x, arr)
        sm = _convolve_edge(vals, w)
        sm[edge_left] = wall[0]
        sm[edge_right] = wall[1]
        out.append(sm)
    return Potentials.from_arrays(out[0], out[1], grid)


# -- compatibility ------------------------------------------------------------

def _wall_derivative(u, dx, side):
    """Second-order one-sided derivative at the wall from the three nearest cell centres."""
    # centres at dx/2, 3dx/2, 5dx/2 from the wall
    c = np.array([-8.0, 9.0, -1.0]) / (3.0 * dx)
    if side == 0:
        return float(c @ u[:3])
    return -float(c @ u[::-1][:3])


def _wall_value(u, side):
    # quadratic extrapolation to the wall
    c = np.array([15.0, -10.0, 3.0]) / 8.0
    return float(c @ (u[:3] if side == 0 else u[::-1][:3]))


@dataclass
class CompatibilityReport:
    zero_order: np.ndarray  # shape (2 species, 2 walls)
    first_order: np.ndarray
    collar_cells: int
    tolerance: float
    warnings: list

    @property
    def flagged(self) -> bool:
        return bool(max(np.max(np.abs(self.zero_order)), np.max(np.abs(self.first_order))) > self.tolerance)

    def to_dict(self) -> dict:
        return {
            "zero_order": self.zero_order.tolist(),
            "first_order": self.first_order.tolist(),
            "collar_cells": self.collar_cells,
            "tolerance": self.tolerance,
            "flagged": self.flagged,
            "warnings": list(self.warnings),
        }


def check_compatibility(data: InitialData, pots: Potentials, law: PressureLaw, eta: float) -> CompatibilityReport:
    """Evaluate both wall compatibility expressions for each species at each wall."""
    from .solver import rhs

    grid = data.grid
    dx = grid.dx
    rho = (data.rho1, data.rho2)
    dV = (pots.dV1, pots.dV2)
    V = (pots.V1, pots.V2)
    sigma = data.sigma
    fp = eval_fprime(law, np.maximum(sigma, 1e-12))
    f2 = eval_fsecond(law, np.maximum(sigma, 1e-12))
    D1, D2 = rhs(data.rho1, data.rho2, pots, law, eta, grid)
    D = (D1, D2)
    zero = np.zeros((2, 2))
    first = np.zeros((2, 2))
    for i in range(2):
        for side in (0, 1):
            dV_wall = dV[i][0 if side == 0 else -1]
            dpot = _wall_derivative(fp, dx, side) + dV_wall
            zero[i, side] = eta * _wall_derivative(rho[i], dx, side) + _wall_value(rho[i], side) * dpot
            first[i, side] = (
                eta * _wall_derivative(D[i], dx, side)
                + _wall_value(D[i], side) * (_wall_derivative(fp + V[i], dx, side))
                + _wall_value(rho[i], side) * _wall_derivative(f2 * (D1 + D2), dx, side)
            )
    collar = _flat_cells(data)
    warn = []
    if collar < 2:
        msg = f"collar resolved by {collar} cell(s); compatibility cannot be verified at this resolution"
        warn.append(msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    return CompatibilityReport(zero, first, collar, COMPAT_TOL, warn)


def _flat_cells(data: InitialData) -> int:
    """Smallest number of leading/trailing cells on which both densities are constant."""
    counts = []
    for rho in (data.rho1, data.rho2):
        for u in (rho, rho[::-1]):
            same = np.flatnonzero(u != u[0])
            counts.append(int(same[0]) if same.size else u.size)
    return min(counts)
