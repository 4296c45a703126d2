"""YAML scenario files.

Recognised keys (defaults in brackets)::

    name: str                                   [scenario]
    pressure: {kind, alpha, lambda, kappa}      kind in {power, logarithmic}
    xi: {quad_tol [1e-10], tail_cutoff [40]}
    grid: {n [256], L [1.0]}
    run: {eta, T, cfl_safety [0.4], output_every [T / 20]}
    init: {preset | csv, mollify [true], slow_mollify [false], collar [extend]}
    potentials: {V1, V2, csv, enforce_boundary [true], mollify [true]}
    diagnostics: {p_list [[2.0]], theta [0.5]}
    sweep: {etas, grids, modes [8]}

Each potential is a mapping {kind: constant|cosine|polynomial, ...} as accepted
by :class:`crossdiff.grid.PotentialSpec`; alternatively ``potentials.csv``
points to samples with columns x, V1, V2.  Relative paths resolve against the
config file's directory.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from .grid import Grid1D, PotentialSpec, Potentials
from .initdata import (
    COLLAR_MODES,
    PRESETS,
    InitialDataError,
    load_csv,
    load_preset,
    mollify_initial,
    mollify_potentials,
    preset_potentials,
)
from .pressure import PressureLaw
from .solver import RunConfig

WALL_MESSAGE = "potentials must satisfy ∂ₓV₁ = ∂ₓV₂ = 0 on ∂Ω"
BOUNDARY_SLOPE_TOL = 1e-8


class ConfigError(ValueError):
    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass
class Scenario:
    name: str
    law: PressureLaw
    n: int
    L: float
    eta: float
    T: float
    cfl_safety: float = 0.4
    output_every: Optional[float] = None
    quad_tol: float = 1e-10
    tail_cutoff: float = 40.0
    preset: Optional[str] = None
    init_csv: Optional[str] = None
    mollify: bool = True
    slow_mollify: bool = False
    collar: str = "extend"
    V1: Optional[PotentialSpec] = None
    V2: Optional[PotentialSpec] = None
    mollify_potentials: bool = True
    enforce_boundary: bool = True
    p_list: tuple = (2.0,)
    theta: float = 0.5
    sweep_etas: list = field(default_factory=list)
    sweep_grids: list = field(default_factory=list)
    sweep_modes: int = 8

    def build(self, eta: Optional[float] = None, n: Optional[int] = None, diagnostics: bool = True) -> RunConfig:
        """Resolve to a run configuration, optionally overriding eta and the cell count."""
        eta = self.eta if eta is None else float(eta)
        grid = Grid1D(self.L, self.n if n is None else int(n))
        data = load_preset(self.preset, grid) if self.preset else load_csv(self.init_csv, grid)
        if self.mollify:
            data = mollify_initial(data, eta, collar=self.collar, slow=self.slow_mollify)
        defaults = preset_potentials(self.preset, self.L) if self.preset else (PotentialSpec.zero(self.L),) * 2
        V1 = self.V1 if self.V1 is not None else defaults[0]
        V2 = self.V2 if self.V2 is not None else defaults[1]
        if self.mollify_potentials:
            pots = mollify_potentials(V1, V2, eta, grid, slow=self.slow_mollify)
        else:
            pots = Potentials.from_specs(V1, V2, grid)
        output_every = self.output_every if self.output_every is not None else (self.T / 20 if self.T > 0 else None)
        return RunConfig(grid, self.law, eta, pots, data, self.T, self.cfl_safety, output_every,
                         xi_tail_cutoff=self.tail_cutoff, xi_quad_tol=self.quad_tol,
                         diagnostics=diagnostics, p_list=tuple(self.p_list), theta=self.theta)


_MISSING = object()


class _Reader:
    def __init__(self, raw: dict):
        self.raw = raw
        self.errors: list[str] = []

    def get(self, path: str, default=_MISSING):
        node = self.raw
        for part in path.split("."):
            if not isinstance(node, dict) or part not in node:
                if default is _MISSING:
                    self.errors.append(f"{path}: missing required key")
                    return None
                return default
            node = node[part]
        return node

    def number(self, path, default=_MISSING, lo=None, hi=None, lo_open=False, hi_open=False, integer=False):
        v = self.get(path, default)
        if v is None:
            return None
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            self.errors.append(f"{path}: expected a number, got {v!r}")
            return None
        if integer and int(v) != v:
            self.errors.append(f"{path}: expected an integer, got {v!r}")
            return None
        if not math.isfinite(v):
            self.errors.append(f"{path}: must be finite")
            return None
        bad = (lo is not None and (v <= lo if lo_open else v < lo)) or (
            hi is not None and (v >= hi if hi_open else v > hi)
        )
        if bad:
            left = "(" if lo_open else "["
            right = ")" if hi_open else "]"
            self.errors.append(f"{path}: {v!r} out of range {left}{lo if lo is not None else '-inf'}, "
                               f"{hi if hi is not None else 'inf'}{right}")
            return None
        return int(v) if integer else float(v)

    def flag(self, path, default):
        v = self.get(path, default)
        if not isinstance(v, bool):
            self.errors.append(f"{path}: expected true/false, got {v!r}")
            return default
        return v


def _slope_tol(V: PotentialSpec) -> float:
    if V.kind != "samples":
        return BOUNDARY_SLOPE_TOL
    # a spline through samples only resolves the wall slope to roughly the sampling accuracy
    vals = np.asarray(V.params["values"], dtype=float)
    return 1e-3 * (1.0 + float(np.ptp(vals))) / V.L


def _resolve(base: Path, p: str) -> str:
    q = Path(p)
    return str(q if q.is_absolute() else base / q)


def _potential(rd: _Reader, key: str, L: float) -> Optional[PotentialSpec]:
    spec = rd.get(f"potentials.{key}", None)
    if spec is None:
        return None
    if not isinstance(spec, dict) or "kind" not in spec:
        rd.errors.append(f"potentials.{key}: expected a mapping with a 'kind' entry")
        return None
    params = {k: v for k, v in spec.items() if k != "kind"}
    try:
        return PotentialSpec(spec["kind"], L, **params)
    except (KeyError, TypeError, ValueError) as exc:
        rd.errors.append(f"potentials.{key}: {exc}")
        return None


def _potentials_from_csv(rd: _Reader, path: str, L: float):
    try:
        table = np.genfromtxt(path, delimiter=",", names=True)
    except OSError as exc:
        rd.errors.append(f"potentials.csv: {exc}")
        return None, None
    names = set(table.dtype.names or ())
    if not {"x", "V1", "V2"} <= names:
        rd.errors.append("potentials.csv: needs columns x, V1, V2")
        return None, None
    order = np.argsort(table["x"])
    x = table["x"][order]
    try:
        return (PotentialSpec("samples", L, x=x, values=table["V1"][order]),
                PotentialSpec("samples", L, x=x, values=table["V2"][order]))
    except ValueError as exc:
        rd.errors.append(f"potentials.csv: {exc}")
        return None, None


def parse_config(source) -> Scenario:
    """Read and validate a scenario; raises ConfigError listing every violation."""
    if isinstance(source, dict):
        raw, base = source, Path.cwd()
    else:
        path = Path(source)
        try:
            raw = yaml.safe_load(path.read_text())
        except OSError as exc:
            raise ConfigError([f"{path}: {exc}"]) from exc
        except yaml.YAMLError as exc:
            raise ConfigError([f"{path}: invalid YAML ({exc})"]) from exc
        base = path.parent
    if not isinstance(raw, dict):
        raise ConfigError(["config root must be a mapping"])
    rd = _Reader(raw)

    kind = rd.get("pressure.kind")
    lam = rd.number("pressure.lambda", 1.0, lo=0.0, lo_open=True)
    kappa = rd.number("pressure.kappa", None, lo=0.0, lo_open=True)
    law = None
    if kind == "power":
        alpha = rd.number("pressure.alpha", lo=0.0, hi=1.0, lo_open=True, hi_open=True)
        if alpha is not None and lam is not None:
            law = PressureLaw.power(alpha, lam, kappa)
    elif kind == "logarithmic":
        if lam is not None:
            law = PressureLaw.logarithmic(lam, kappa)
    elif kind == "custom":
        rd.errors.append("pressure.kind: custom laws are available through the Python API only")
    elif kind is not None:
        rd.errors.append(f"pressure.kind: unknown kind {kind!r} (expected power or logarithmic)")

    quad_tol = rd.number("xi.quad_tol", 1e-10, lo=0.0, lo_open=True)
    tail_cutoff = rd.number("xi.tail_cutoff", 40.0, lo=0.0, lo_open=True)
    n = rd.number("grid.n", 256, lo=16, integer=True)
    L = rd.number("grid.L", 1.0, lo=0.0, lo_open=True)
    eta = rd.number("run.eta", lo=0.0, hi=1.0, lo_open=True)
    T = rd.number("run.T", lo=0.0)
    cfl = rd.number("run.cfl_safety", 0.4, lo=0.0, hi=1.0, lo_open=True, hi_open=True)
    out_every = rd.get("run.output_every", None)
    if out_every is not None:
        out_every = rd.number("run.output_every", lo=0.0, lo_open=True)

    preset = rd.get("init.preset", None)
    init_csv = rd.get("init.csv", None)
    if preset is None and init_csv is None:
        rd.errors.append("init: one of init.preset or init.csv is required")
    elif preset is not None and init_csv is not None:
        rd.errors.append("init: give either init.preset or init.csv, not both")
    elif preset is not None and preset not in PRESETS:
        rd.errors.append(f"init.preset: unknown preset {preset!r} (expected one of {', '.join(PRESETS)})")
    if init_csv is not None:
        init_csv = _resolve(base, init_csv)
        if not os.path.exists(init_csv):
            rd.errors.append(f"init.csv: file not found: {init_csv}")
    mollify = rd.flag("init.mollify", True)
    slow = rd.flag("init.slow_mollify", False)
    collar = rd.get("init.collar", "extend")
    if collar not in COLLAR_MODES:
        rd.errors.append(f"init.collar: expected one of {COLLAR_MODES}, got {collar!r}")
    if eta is not None and L is not None:
        width = math.sqrt(eta) if slow else eta
        if mollify and width > L / 8:
            rd.errors.append(f"run.eta: smoothing width {width:g} exceeds grid.L / 8 = {L / 8:g}")

    enforce = rd.flag("potentials.enforce_boundary", True)
    mollify_pots = rd.flag("potentials.mollify", True)
    V1 = V2 = None
    Lval = L if L is not None else 1.0
    if rd.get("potentials.csv", None) is not None:
        V1, V2 = _potentials_from_csv(rd, _resolve(base, rd.get("potentials.csv")), Lval)
    else:
        V1 = _potential(rd, "V1", Lval)
        V2 = _potential(rd, "V2", Lval)
    if enforce:
        for label, V in (("V1", V1), ("V2", V2)):
            if V is not None and max(abs(s) for s in V.boundary_slopes()) > _slope_tol(V):
                rd.errors.append(f"potentials.{label}: boundary slope {V.boundary_slopes()} violates the "
                                 f"wall condition; {WALL_MESSAGE}")

    p_list = rd.get("diagnostics.p_list", [2.0])
    if not isinstance(p_list, list) or not all(isinstance(p, (int, float)) and p > 0 for p in p_list):
        rd.errors.append("diagnostics.p_list: expected a list of positive numbers")
        p_list = [2.0]
    theta = rd.number("diagnostics.theta", 0.5, lo=0.0, lo_open=True)

    etas = rd.get("sweep.etas", [])
    grids = rd.get("sweep.grids", [])
    if not isinstance(etas, list) or not all(isinstance(e, (int, float)) and 0 < e <= 1 for e in etas):
        rd.errors.append("sweep.etas: expected a list of numbers in (0, 1]")
        etas = []
    if not isinstance(grids, list) or not all(isinstance(g, int) and g >= 16 for g in grids):
        rd.errors.append("sweep.grids: expected a list of integers >= 16")
        grids = []
    modes = rd.number("sweep.modes", 8, lo=0, integer=True)

    if rd.errors:
        raise ConfigError(rd.errors)
    return Scenario(
        name=str(raw.get("name", "scenario")), law=law, n=n, L=L, eta=eta, T=T, cfl_safety=cfl,
        output_every=out_every, quad_tol=quad_tol, tail_cutoff=tail_cutoff, preset=preset, init_csv=init_csv,
        mollify=mollify, slow_mollify=slow, collar=collar, V1=V1, V2=V2, mollify_potentials=mollify_pots,
        enforce_boundary=enforce, p_list=tuple(float(p) for p in p_list), theta=theta,
        sweep_etas=[float(e) for e in etas], sweep_grids=list(grids), sweep_modes=modes,
    )


def build_safely(scenario: Scenario, **kw) -> RunConfig:
    try:
        return scenario.build(**kw)
    except (InitialDataError, ValueError) as exc:
        raise ConfigError([str(exc)]) from exc
