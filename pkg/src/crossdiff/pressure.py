"""Pressure laws f and the quantities derived from them.

Three families are supported:

* ``power``: f(s) = lam / (alpha - 1) * s**alpha with alpha in (0, 1) (fast diffusion)
* ``logarithmic``: f(s) = lam * s * log(s)
* ``custom``: user supplied f, f', f'', f''' evaluators

All evaluators accept scalars or numpy arrays.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate

S_FLOOR = 1e-12

POWER = "power"
LOGARITHMIC = "logarithmic"
CUSTOM = "custom"
KINDS = (POWER, LOGARITHMIC, CUSTOM)


class PressureDomainError(ValueError):
    """Raised when a pressure law is evaluated at a non-positive density."""


@dataclass(frozen=True)
class PressureLaw:
    kind: str
    alpha: Optional[float] = None
    lam: float = 1.0
    kappa: Optional[float] = None
    f: Optional[Callable] = field(default=None, compare=False, repr=False)
    fprime: Optional[Callable] = field(default=None, compare=False, repr=False)
    fsecond: Optional[Callable] = field(default=None, compare=False, repr=False)
    fthird: Optional[Callable] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown pressure kind {self.kind!r}")
        if not self.lam > 0:
            raise ValueError("lambda must be positive")
        if self.kind in (POWER, CUSTOM):
            if self.alpha is None or not 0.0 < self.alpha < 1.0:
                raise ValueError("alpha must lie in (0, 1)")
        if self.kind == CUSTOM:
            if None in (self.f, self.fprime, self.fsecond, self.fthird):
                raise ValueError("custom laws need f, fprime, fsecond and fthird")
            if self.kappa is None or not self.kappa > 0:
                raise ValueError("custom laws need kappa > 0")
        if self.kappa is None:
            object.__setattr__(self, "kappa", default_kappa(self.kind, self.alpha, self.lam))
        elif not self.kappa > 0:
            raise ValueError("kappa must be positive")

    @classmethod
    def power(cls, alpha: float, lam: float = 1.0, kappa: Optional[float] = None) -> "PressureLaw":
        return cls(POWER, alpha=alpha, lam=lam, kappa=kappa)

    @classmethod
    def logarithmic(cls, lam: float = 1.0, kappa: Optional[float] = None) -> "PressureLaw":
        return cls(LOGARITHMIC, lam=lam, kappa=kappa)

    @property
    def exponent(self) -> float:
        """The alpha entering the aggregate estimates (1 for the logarithmic law)."""
        return 1.0 if self.kind == LOGARITHMIC else float(self.alpha)


def default_kappa(kind: str, alpha: Optional[float], lam: float) -> float:
    # smallest kappa for which the growth and ratio conditions hold for the closed-form laws
    if kind == POWER:
        return max(1.0 / (alpha**2 * lam), 2.0 - alpha)
    return 1.0


def _check_positive(s):
    arr = np.asarray(s, dtype=float)
    if np.any(~(arr > 0)):
        raise PressureDomainError("pressure law evaluated at a non-positive density")
    return arr


def _out(arr, s):
    return float(arr) if np.ndim(s) == 0 else arr


def eval_f(law: PressureLaw, s):
    x = _check_positive(s)
    if law.kind == POWER:
        v = law.lam / (law.alpha - 1.0) * x**law.alpha
    elif law.kind == LOGARITHMIC:
        v = law.lam * x * np.log(x)
    else:
        v = np.asarray(law.f(x), dtype=float)
    return _out(v, s)


def eval_fprime(law: PressureLaw, s):
    x = _check_positive(s)
    if law.kind == POWER:
        v = law.lam * law.alpha / (law.alpha - 1.0) * x ** (law.alpha - 1.0)
    elif law.kind == LOGARITHMIC:
        v = law.lam * (np.log(x) + 1.0)
    else:
        v = np.asarray(law.fprime(x), dtype=float)
    return _out(v, s)


def eval_fsecond(law: PressureLaw, s):
    x = _check_positive(s)
    if law.kind == POWER:
        v = law.lam * law.alpha * x ** (law.alpha - 2.0)
    elif law.kind == LOGARITHMIC:
        v = law.lam / x
    else:
        v = np.asarray(law.fsecond(x), dtype=float)
    return _out(v, s)


def eval_fthird(law: PressureLaw, s):
    x = _check_positive(s)
    if law.kind == POWER:
        v = law.lam * law.alpha * (law.alpha - 2.0) * x ** (law.alpha - 3.0)
    elif law.kind == LOGARITHMIC:
        v = -law.lam / x**2
    else:
        v = np.asarray(law.fthird(x), dtype=float)
    return _out(v, s)


def eval_g(law: PressureLaw, s, tol: float = 1e-10):
    """g(s) = int_1^s z f''(z) dz."""
    x = _check_positive(s)
    if law.kind == POWER:
        v = law.lam * (x**law.alpha - 1.0)
    elif law.kind == LOGARITHMIC:
        v = law.lam * (x - 1.0)
    else:
        flat = np.atleast_1d(x).ravel()
        vals = np.empty_like(flat)
        for k, b in enumerate(flat):
            vals[k] = integrate.quad(
                lambda z: z * float(law.fsecond(z)), 1.0, b, epsabs=tol, epsrel=1e-12, limit=200
            )[0]
        v = vals.reshape(np.shape(x))
    return _out(v, s)


def clamp(s, floor: float = S_FLOOR):
    """Clamp densities to the evaluation floor; returns (clamped, number of clamped entries)."""
    arr = np.asarray(s, dtype=float)
    mask = arr < floor
    return np.where(mask, floor, arr), int(np.count_nonzero(mask))


@dataclass
class HypothesisReport:
    samples: np.ndarray
    fsecond_positive: np.ndarray
    growth_pass: np.ndarray
    ratio_pass: np.ndarray
    growth_margin: np.ndarray
    ratio_margin: np.ndarray

    @property
    def passed(self) -> bool:
        return bool(self.fsecond_positive.all() and self.growth_pass.all() and self.ratio_pass.all())

    @property
    def worst_growth_margin(self) -> float:
        return float(np.min(self.growth_margin))

    @property
    def worst_ratio_margin(self) -> float:
        return float(np.min(self.ratio_margin))

    def failures(self) -> list[str]:
        out = []
        for s, p2, i2, i3 in zip(self.samples, self.fsecond_positive, self.growth_pass, self.ratio_pass):
            if not p2:
                out.append(f"f''({s:.6g}) <= 0")
            if not i2:
                out.append(f"growth condition violated at s={s:.6g}")
            if not i3:
                out.append(f"ratio condition violated at s={s:.6g}")
        return out

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "n_samples": int(self.samples.size),
            "worst_growth_margin": self.worst_growth_margin,
            "worst_ratio_margin": self.worst_ratio_margin,
            "failures": self.failures(),
        }


def check_hypothesis(law: PressureLaw, s_samples) -> HypothesisReport:
    """Sample the structural conditions: f'' > 0, growth and ratio.

    The growth condition is checked as s**alpha / (alpha kappa) <= s**2 f''(s), the ratio
    condition as
    |s f'''(s) / f''(s)| <= kappa.  Margins are reported as
    (right side - left side), so negative margins are violations.  For the
    logarithmic law alpha is taken to be 1.
    """
    s = np.asarray(s_samples, dtype=float)
    if np.any(~(s > 0)):
        raise PressureDomainError("hypothesis samples must be positive")
    alpha = law.exponent
    f2 = np.asarray(eval_fsecond(law, s), dtype=float)
    f3 = np.asarray(eval_fthird(law, s), dtype=float)
    pos = f2 > 0
    lhs2 = s**alpha / (alpha * law.kappa)
    rhs2 = s**2 * f2
    growth_margin = rhs2 - lhs2
    # relative slack keeps exact equality cases (kappa = 1/(alpha^2 lam)) passing
    growth_pass = growth_margin >= -1e-12 * np.maximum(np.abs(lhs2), np.abs(rhs2))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(pos, np.abs(s * f3 / f2), np.inf)
    ratio_margin = law.kappa - ratio
    ratio_pass = ratio_margin >= -1e-12 * law.kappa
    return HypothesisReport(s, pos, growth_pass & pos, ratio_pass & pos, growth_margin, ratio_margin)
