"""Mesh, state and potential containers."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.interpolate import CubicSpline


@dataclass(frozen=True)
class Grid1D:
    """Uniform cell-centred mesh on (0, L)."""

    L: float
    n: int

    def __post_init__(self):
        if self.n < 16:
            raise ValueError("grid needs at least 16 cells")
        if not self.L > 0:
            raise ValueError("domain length must be positive")

    @property
    def dx(self) -> float:
        return self.L / self.n

    @property
    def centers(self) -> np.ndarray:
        return (np.arange(self.n) + 0.5) * self.dx

    @property
    def faces(self) -> np.ndarray:
        return np.arange(self.n + 1) * self.dx

    def mass(self, rho) -> float:
        return float(np.sum(rho) * self.dx)


@dataclass
class State:
    t: float
    rho1: np.ndarray
    rho2: np.ndarray

    def copy(self) -> "State":
        return State(self.t, self.rho1.copy(), self.rho2.copy())

    @property
    def sigma(self) -> np.ndarray:
        return self.rho1 + self.rho2


class PotentialSpec:
    """An analytic or sampled potential on [0, L] with derivatives up to third order.

    ``kind`` is one of ``constant`` (params: value), ``cosine`` (params: amplitudes,
    a list a_k for sum_k a_k cos(k pi x / L), k starting at 1, plus optional offset),
    ``polynomial`` (params: coefficients, lowest order first) or ``samples``
    (params: x, values; interpolated with a clamped-free cubic spline).
    """

    def __init__(self, kind: str = "constant", L: float = 1.0, **params):
        self.kind = kind
        self.L = float(L)
        self.params = params
        if kind == "constant":
            self._value = float(params.get("value", 0.0))
        elif kind == "cosine":
            self._amps = np.asarray(params.get("amplitudes", []), dtype=float)
            self._offset = float(params.get("offset", 0.0))
        elif kind == "polynomial":
            self._poly = np.polynomial.Polynomial(np.asarray(params["coefficients"], dtype=float))
        elif kind == "samples":
            x = np.asarray(params["x"], dtype=float)
            v = np.asarray(params["values"], dtype=float)
            if x.size < 4 or np.any(np.diff(x) <= 0):
                raise ValueError("potential samples need >= 4 strictly increasing abscissae")
            self._spline = CubicSpline(x, v, bc_type="not-a-knot")
        else:
            raise ValueError(f"unknown potential kind {kind!r}")

    @classmethod
    def zero(cls, L: float = 1.0) -> "PotentialSpec":
        return cls("constant", L, value=0.0)

    @classmethod
    def cosine(cls, amplitudes: Sequence[float], L: float = 1.0, offset: float = 0.0) -> "PotentialSpec":
        return cls("cosine", L, amplitudes=list(amplitudes), offset=offset)

    def __call__(self, x, order: int = 0) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind == "constant":
            return np.full_like(x, self._value if order == 0 else 0.0)
        if self.kind == "cosine":
            out = np.full_like(x, self._offset if order == 0 else 0.0)
            for k, a in enumerate(self._amps, start=1):
                w = k * np.pi / self.L
                # d^m/dx^m cos(w x) = w^m cos(w x + m pi / 2)
                out = out + a * w**order * np.cos(w * x + order * np.pi / 2)
            return out
        if self.kind == "polynomial":
            p = self._poly.deriv(order) if order else self._poly
            return p(x)
        return self._spline(x, order)

    def boundary_slopes(self) -> tuple[float, float]:
        d = self(np.array([0.0, self.L]), 1)
        return float(d[0]), float(d[1])


@dataclass
class Potentials:
    """Potentials sampled on a grid.

    dV1/dV2 live on the n+1 faces; interior entries are (V_{j+1} - V_j)/dx so
    that the scheme and the discrete energy see the same differences.
    d2/d3 hold the second and third derivatives of V1 - V2 at cell centres.
    """

    V1: np.ndarray
    V2: np.ndarray
    dV1: np.ndarray
    dV2: np.ndarray
    d2: np.ndarray
    d3: np.ndarray
    boundary_compatible: bool
    specs: Optional[tuple] = field(default=None, repr=False, compare=False)

    @property
    def equal(self) -> bool:
        return bool(np.array_equal(self.V1, self.V2))

    @classmethod
    def from_specs(cls, V1: PotentialSpec, V2: PotentialSpec, grid: Grid1D, tol: float = 1e-12) -> "Potentials":
        x = grid.centers
        v1, v2 = V1(x), V2(x)
        ends = np.array([0.0, grid.L])
        b1, b2 = V1(ends, 1), V2(ends, 1)
        d2 = V1(x, 2) - V2(x, 2)
        d3 = V1(x, 3) - V2(x, 3)
        compatible = bool(np.all(np.abs(b1) <= tol) and np.all(np.abs(b2) <= tol))
        dv1 = _face_diff(v1, grid.dx, b1)
        dv2 = _face_diff(v2, grid.dx, b2)
        return cls(v1, v2, dv1, dv2, d2, d3, compatible, specs=(V1, V2))

    @classmethod
    def from_arrays(cls, V1, V2, grid: Grid1D, boundary_slopes=((0.0, 0.0), (0.0, 0.0))) -> "Potentials":
        """Grid potentials; higher derivatives of V1 - V2 by finite differences with mirrored ghosts."""
        v1 = np.asarray(V1, dtype=float).copy()
        v2 = np.asarray(V2, dtype=float).copy()
        b1 = np.asarray(boundary_slopes[0], dtype=float)
        b2 = np.asarray(boundary_slopes[1], dtype=float)
        dw = v1 - v2
        dx = grid.dx
        # derivative of V1 - V2 at faces, then differentiate again
        dface = _face_diff(dw, dx, b1 - b2)
        d2 = np.diff(dface) / dx
        d2_faces = np.concatenate(([d2[0]], 0.5 * (d2[1:] + d2[:-1]), [d2[-1]]))
        d3 = np.diff(d2_faces) / dx
        compatible = bool(np.all(b1 == 0.0) and np.all(b2 == 0.0))
        return cls(v1, v2, _face_diff(v1, dx, b1), _face_diff(v2, dx, b2), d2, d3, compatible)

    def swapped(self) -> "Potentials":
        specs = None if self.specs is None else (self.specs[1], self.specs[0])
        return Potentials(self.V2, self.V1, self.dV2, self.dV1, -self.d2, -self.d3, self.boundary_compatible, specs)


def _face_diff(v, dx, boundary):
    out = np.empty(v.size + 1)
    out[1:-1] = np.diff(v) / dx
    out[0], out[-1] = boundary[0], boundary[1]
    return out
