"""The non-linearities xi and xi_eta weighting the drift difference inside omega.

    xi(s)     = -s int_s^inf dy / (y^3 f''(y))
    xi_eta(s) = -s int_s^inf exp(-int_s^y 2 eta / (z^2 f''(z)) dz) dy / (y^3 f''(y))

(the two exponentials of the textbook form are merged, so the inner integral
starts at s rather than 0; this keeps the logarithmic law finite).  Both
solve the linear ODE

    xi_eta'(s) s^2 f''(s) - xi_eta(s) (2 eta + s f''(s)) = 1,

which is used to evaluate the first and second derivatives.

Evaluation works in the log variable u = log(y).  A chain of panels covering
[S_MIN, exp(u_end)] is precomputed once per (law, eta); on each panel both the
outer and the inner integral use Gauss-Legendre rules, and the backward
recurrence I(a) = P(a, b) + exp(-Q(a, b)) I(b) assembles the tail integral at
the panel nodes.  Off-node values complete the recurrence from the next node,
so no interpolation error enters.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .pressure import (
    LOGARITHMIC,
    POWER,
    PressureDomainError,
    PressureLaw,
    eval_fsecond,
    eval_fthird,
)

S_MIN = 1e-12
S_GRID_MAX = 1e8
GRID_POINTS = 512
_GL_ORDER = 16
_U_HARD_MAX = 690.0


class XiEvaluationError(ArithmeticError):
    """Raised when the tail integral defining xi does not converge."""


_GL_X, _GL_W = np.polynomial.legendre.leggauss(_GL_ORDER)


class XiEvaluator:
    """Evaluates xi, xi_eta and their derivatives for one pressure law and viscosity."""

    def __init__(
        self,
        law: PressureLaw,
        eta: float = 0.0,
        tail_cutoff: float = 40.0,
        quad_tol: float = 1e-10,
        grid_points: int = GRID_POINTS,
    ):
        if not 0.0 <= eta <= 1.0:
            raise ValueError("eta must lie in [0, 1]")
        if tail_cutoff <= 0 or quad_tol <= 0:
            raise ValueError("tail_cutoff and quad_tol must be positive")
        self.law = law
        self.eta = float(eta)
        self.tail_cutoff = float(tail_cutoff)
        self.quad_tol = float(quad_tol)
        self._nodes = None
        self._tail = None
        self._xi0 = None
        self.grid_points = grid_points
        self.tail_error = 0.0
        if self._needs_table():
            self._build_table()

    # -- integrands in the log variable ---------------------------------
    def _log_s2f2(self, u):
        """log(y^2 f''(y)) at y = exp(u); closed forms avoid overflow far into the tail."""
        law = self.law
        if law.kind == POWER:
            return math.log(law.lam * law.alpha) + law.alpha * u
        if law.kind == LOGARITHMIC:
            return math.log(law.lam) + u
        y = np.exp(u)
        with np.errstate(over="ignore", under="ignore", divide="ignore", invalid="ignore"):
            return np.log(y * y * eval_fsecond(law, y))

    def _h(self, u):
        return np.exp(-self._log_s2f2(u))

    def _q(self, u):
        return 2.0 * self.eta * np.exp(u - self._log_s2f2(u))

    def _needs_table(self) -> bool:
        if self.law.kind == LOGARITHMIC:
            return False
        if self.law.kind == POWER and self.eta == 0.0:
            return False
        return True

    def _panel(self, a, b):
        """Return (P, Q) for panels [a, b] given as equal-shape arrays."""
        a = np.asarray(a, dtype=float)[..., None]
        b = np.asarray(b, dtype=float)[..., None]
        half = 0.5 * (b - a)
        u = a + half * (1.0 + _GL_X)
        h = self._h(u)
        if self.eta == 0.0:
            return np.sum(half * _GL_W * h, axis=-1), np.zeros(np.shape(a)[:-1])
        # inner integral of q from a to each outer node
        ihalf = 0.5 * (u - a)[..., None]
        v = a[..., None] + ihalf * (1.0 + _GL_X)
        inner = np.sum(ihalf * _GL_W * self._q(v), axis=-1)
        P = np.sum(half * _GL_W * np.exp(-inner) * h, axis=-1)
        Q = np.sum(half * _GL_W * self._q(u), axis=-1)
        return P, Q

    def _build_table(self):
        u0, u1 = math.log(S_MIN), math.log(S_GRID_MAX)
        width = (u1 - u0) / (self.grid_points - 1)
        alpha = self.law.exponent
        # extend the chain until the growth-condition tail bound kappa*exp(-alpha*U)*S is below tolerance
        u_end = u1 + self.tail_cutoff
        need = (math.log(self.law.kappa * S_GRID_MAX / self.quad_tol)) / alpha
        u_end = min(max(u_end, need), _U_HARD_MAX)
        n_ext = int(math.ceil((u_end - u1) / width))
        nodes = u0 + width * np.arange(self.grid_points + n_ext)
        P, Q = self._panel(nodes[:-1], nodes[1:])
        h_end = float(self._h(nodes[-1]))
        if not np.isfinite(h_end) or h_end / alpha > max(self.quad_tol, 1e-8) or not np.all(np.isfinite(P)):
            raise XiEvaluationError("tail integral of 1/(y^3 f''(y)) does not converge")
        # discarded tail, bounded through the growth condition: 1/(y^2 f'') <= alpha kappa y^-alpha
        self.tail_error = self.law.kappa * math.exp(-alpha * nodes[-1])
        decay = np.exp(-Q)
        I = np.empty(nodes.size)
        I[-1] = 0.0
        for k in range(nodes.size - 2, -1, -1):
            I[k] = P[k] + decay[k] * I[k + 1]
        self._nodes = nodes
        self._tail = I
        self._width = width

    def _table_eval(self, s):
        u = np.log(s)
        if np.any(u < self._nodes[0]) or np.any(u > self._nodes[-1]):
            raise PressureDomainError("xi_eta evaluated outside the tabulated density range")
        k = np.clip(((u - self._nodes[0]) / self._width).astype(int) + 1, 1, self._nodes.size - 1)
        b = self._nodes[k]
        P, Q = self._panel(u, b)
        return -s * (P + np.exp(-Q) * self._tail[k])

    # -- public evaluations ----------------------------------------------
    def xi(self, s):
        x = _positive(s)
        law = self.law
        if law.kind == POWER:
            v = -(x ** (1.0 - law.alpha)) / (law.lam * law.alpha**2)
        elif law.kind == LOGARITHMIC:
            v = np.full_like(x, -1.0 / law.lam)
        elif self.eta == 0.0:
            v = self._table_eval(x)
        else:
            if self._xi0 is None:
                self._xi0 = XiEvaluator(law, 0.0, self.tail_cutoff, self.quad_tol, self.grid_points)
            v = self._xi0._table_eval(x)
        return _out(v, s)

    def xi_quad(self, s):
        """xi by adaptive quadrature of the defining integral (independent of the table)."""
        x = np.atleast_1d(_positive(s)).astype(float)
        out = np.empty_like(x)
        for k, sk in enumerate(x.ravel()):
            out.ravel()[k] = -sk * _tail_quad(self, math.log(sk), 0.0)
        return _out(out.reshape(np.shape(s)), s)

    def xi_eta(self, s):
        x = _positive(s)
        if self.eta == 0.0:
            return self.xi(s)
        if self.law.kind == LOGARITHMIC:
            v = np.full_like(x, -1.0 / (self.law.lam + 2.0 * self.eta))
        else:
            v = self._table_eval(x)
        return _out(v, s)

    def xi_eta_direct(self, s):
        """xi_eta by nested adaptive quadrature; slow, meant for cross-checks."""
        x = np.atleast_1d(_positive(s)).astype(float)
        out = np.empty_like(x)
        for k, sk in enumerate(x.ravel()):
            out.ravel()[k] = -sk * _tail_quad(self, math.log(sk), self.eta)
        return _out(out.reshape(np.shape(s)), s)

    def xi_eta_prime(self, s):
        x = _positive(s)
        f2 = np.asarray(eval_fsecond(self.law, x))
        xe = np.asarray(self.xi_eta(x))
        denom = x * x * f2
        if np.any(denom == 0):
            raise ZeroDivisionError("s^2 f''(s) vanishes")
        return _out((1.0 + xe * (2.0 * self.eta + x * f2)) / denom, s)

    def xi_eta_second(self, s):
        x = _positive(s)
        f2 = np.asarray(eval_fsecond(self.law, x))
        f3 = np.asarray(eval_fthird(self.law, x))
        xe = np.asarray(self.xi_eta(x))
        xp = np.asarray(self.xi_eta_prime(x))
        dlog = f3 / f2 + 1.0 / x
        v = (2.0 * self.eta * xp - (1.0 + 2.0 * self.eta * xe) * dlog) / (f2 * x * x)
        return _out(v, s)

    def ode_residual(self, s, rel_step: float = 1e-4):
        """ODE residual with xi_eta' from central differences of xi_eta."""
        x = _positive(s)
        h = rel_step * x
        dxe = (np.asarray(self.xi_eta(x + h)) - np.asarray(self.xi_eta(x - h))) / (2.0 * h)
        f2 = np.asarray(eval_fsecond(self.law, x))
        r = dxe * x * x * f2 - np.asarray(self.xi_eta(x)) * (2.0 * self.eta + x * f2) - 1.0
        return _out(r, s)

    def verify_bounds(self, s_samples) -> "XiBoundsReport":
        return verify_bounds(self, s_samples)


def _tail_quad(ev: XiEvaluator, a: float, eta: float) -> float:
    """int_a^inf exp(-int_a^u q) h(u) du with scipy's adaptive rules."""
    law = ev.law
    u_end = max(a + ev.tail_cutoff, math.log(law.kappa / ev.quad_tol) / law.exponent)
    u_end = min(u_end, _U_HARD_MAX)

    def h(u):
        return float(ev._h(u))

    if eta == 0.0:
        val, _ = integrate.quad(h, a, u_end, epsabs=ev.quad_tol * 1e-2, epsrel=1e-13, limit=500)
        return val

    def q(u):
        y = math.exp(u)
        return 2.0 * eta / (y * float(eval_fsecond(law, y)))

    def integrand(u):
        inner, _ = integrate.quad(q, a, u, epsabs=1e-14, epsrel=1e-13, limit=200)
        return math.exp(-inner) * h(u)

    val, _ = integrate.quad(integrand, a, u_end, epsabs=ev.quad_tol * 1e-2, epsrel=1e-12, limit=500)
    return val


@dataclass
class XiBoundsReport:
    samples: np.ndarray
    lhs: dict
    rhs: dict
    applicable: dict

    def passes(self, name: str) -> np.ndarray:
        lhs, rhs = self.lhs[name], self.rhs[name]
        return lhs <= rhs + 1e-9 * np.maximum(np.abs(rhs), 1e-300)

    def margin(self, name: str) -> float:
        return float(np.min(self.rhs[name] - self.lhs[name]))

    @property
    def passed(self) -> bool:
        return all(bool(self.passes(k).all()) for k in self.lhs if self.applicable[k])

    def to_dict(self) -> dict:
        return {
            k: {
                "applicable": self.applicable[k],
                "all_pass": bool(self.passes(k).all()),
                "n_fail": int(np.count_nonzero(~self.passes(k))),
                "worst_margin": self.margin(k),
            }
            for k in self.lhs
        }


def verify_bounds(ev: XiEvaluator, s_samples) -> XiBoundsReport:
    """Check both bound families at each sample.

    general_k bound the k-th derivative of xi_eta through xi and f alone;
    kappa_k are the explicit power-type bounds in terms of (alpha, kappa).

    The kappa family relies on the growth and ratio conditions with the law's (alpha, kappa); it is
    flagged not applicable for the logarithmic law, but still evaluated.
    """
    from .pressure import check_hypothesis

    s = np.asarray(s_samples, dtype=float)
    law, eta = ev.law, ev.eta
    a, k = law.exponent, law.kappa
    f2 = np.asarray(eval_fsecond(law, s))
    f3 = np.asarray(eval_fthird(law, s))
    xi = np.abs(np.asarray(ev.xi(s)))
    xe = np.abs(np.asarray(ev.xi_eta(s)))
    xp = np.abs(np.asarray(ev.xi_eta_prime(s)))
    xpp = np.abs(np.asarray(ev.xi_eta_second(s)) * f2 * s * s)
    dlog = np.abs(f3 / f2 + 1.0 / s)
    lhs = {
        "general_0": xe,
        "general_1": xp,
        "general_2": xpp,
        "kappa_0": xe,
        "kappa_1": xp,
        "kappa_2": xpp,
    }
    rhs = {
        "general_0": xi,
        "general_1": xi / s + 1.0 / (s * s * f2) + 2.0 * eta * xi / (s * s * f2),
        "general_2": 2.0 * eta * xp + (1.0 + 2.0 * eta * xi) * dlog,
        "kappa_0": k * s ** (1.0 - a),
        "kappa_1": (1.0 + a) * k * s ** (-a) + 2.0 * eta * a * k * k * s ** (1.0 - 2.0 * a),
        "kappa_2": (k + 1.0) / s
        + 2.0 * eta * k * (2.0 + a + k) * s ** (-a)
        + 4.0 * a * eta * eta * k * k * s ** (1.0 - 2.0 * a),
    }
    hyp_ok = law.kind != LOGARITHMIC and check_hypothesis(law, s).passed
    applicable = {name: (name.startswith("general") or hyp_ok) for name in lhs}
    return XiBoundsReport(s, lhs, rhs, applicable)


def _positive(s):
    x = np.asarray(s, dtype=float)
    if np.any(~(x > 0)):
        raise PressureDomainError("xi evaluated at a non-positive density")
    return x


def _out(v, s):
    v = np.asarray(v, dtype=float)
    return float(v) if np.ndim(s) == 0 else v
