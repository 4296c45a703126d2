"""Compiled inner loop for the closed-form pressure laws.

Mirrors the numpy path in :mod:`crossdiff.solver` operation for operation;
the test suite checks that the two agree.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit

LAW_POWER = 0
LAW_LOG = 1

OK = 0
BUFFER_FULL = 1
SCHEME_FAILURE = 2
NONFINITE = 3

_S_FLOOR = 1e-12
_LOG_FLOOR = 1e-300


@njit(cache=True)
def _fp(kind, alpha, lam, s):
    s = max(s, _S_FLOOR)
    if kind == LAW_POWER:
        return lam * alpha / (alpha - 1.0) * s ** (alpha - 1.0)
    return lam * (math.log(s) + 1.0)


@njit(cache=True)
def _f(kind, alpha, lam, s):
    s = max(s, _S_FLOOR)
    if kind == LAW_POWER:
        return lam / (alpha - 1.0) * s**alpha
    return lam * s * math.log(s)


@njit(cache=True)
def _sf2(kind, alpha, lam, s):
    # s f''(s)
    s = max(s, _S_FLOOR)
    if kind == LAW_POWER:
        return lam * alpha * s ** (alpha - 1.0)
    return lam


@njit(cache=True)
def bernoulli_mobility(w, eta):
    """A(w) = w / (exp(w / eta) - 1), the upwind limit max(-w, 0) at eta = 0."""
    a, b = mobility_pair(w, eta)
    return a


@njit(cache=True)
def mobility_pair(w, eta):
    """(A(w), A(-w)); uses A(-w) = A(w) + w with the small member from a single expm1."""
    aw = abs(w)
    if eta == 0.0:
        small = 0.0
    elif w == 0.0:
        return eta, eta
    else:
        z = aw / eta
        small = 0.0 if z > 700.0 else aw / math.expm1(z)
    big = small + aw
    if w > 0.0:
        return small, big
    return big, small


@njit(cache=True)
def _prepare(rho1, rho2, V1, V2, kind, alpha, lam, eta, dx, fp, lr1, lr2, J1, J2, A1, B1, A2, B2):
    """Chemical potentials and face fluxes; A*/B* hold A(w), A(-w) per interior face."""
    n = rho1.size
    for j in range(n):
        fp[j] = _fp(kind, alpha, lam, rho1[j] + rho2[j])
        lr1[j] = math.log(max(rho1[j], _LOG_FLOOR))
        lr2[j] = math.log(max(rho2[j], _LOG_FLOOR))
    J1[0] = 0.0
    J2[0] = 0.0
    J1[n] = 0.0
    J2[n] = 0.0
    for j in range(n - 1):
        dfp = fp[j + 1] - fp[j]
        a, b = mobility_pair(dfp + (V1[j + 1] - V1[j]), eta)
        A1[j] = a
        B1[j] = b
        J1[j + 1] = (a * rho1[j] - b * rho1[j + 1]) / dx
        a, b = mobility_pair(dfp + (V2[j + 1] - V2[j]), eta)
        A2[j] = a
        B2[j] = b
        J2[j + 1] = (a * rho2[j] - b * rho2[j + 1]) / dx


@njit(cache=True)
def _energy(rho1, rho2, V1, V2, kind, alpha, lam, eta, dx):
    e = 0.0
    for j in range(rho1.size):
        a = rho1[j]
        b = rho2[j]
        v = _f(kind, alpha, lam, a + b) + V1[j] * a + V2[j] * b
        if eta > 0.0:
            if a > 0.0:
                v += eta * a * math.log(max(a, _S_FLOOR))
            if b > 0.0:
                v += eta * b * math.log(max(b, _S_FLOOR))
        e += v
    return e * dx


@njit(cache=True)
def _dissipation(V1, V2, eta, fp, lr1, lr2, J1, J2):
    d = 0.0
    for j in range(fp.size - 1):
        dfp = fp[j + 1] - fp[j]
        d1 = dfp + (V1[j + 1] - V1[j])
        d2 = dfp + (V2[j + 1] - V2[j])
        if eta > 0.0:
            d1 += eta * (lr1[j + 1] - lr1[j])
            d2 += eta * (lr2[j + 1] - lr2[j])
        d -= J1[j + 1] * d1 + J2[j + 1] * d2
    return d


@njit(cache=True)
def _stable_dt(rho1, rho2, kind, alpha, lam, eta, dx, A1, B1, A2, B2):
    n = rho1.size
    diff = 0.0
    for j in range(n):
        diff = max(diff, _sf2(kind, alpha, lam, rho1[j] + rho2[j]))
    bound = dx * dx / (2.0 * (eta + diff))
    wmax = 0.0
    out = 0.0
    for j in range(n):
        # total outflow coefficient of cell j for each species
        o1 = 0.0
        o2 = 0.0
        if j < n - 1:
            o1 += A1[j]
            o2 += A2[j]
            wmax = max(wmax, abs(B1[j] - A1[j]), abs(B2[j] - A2[j]))
        if j > 0:
            o1 += B1[j - 1]
            o2 += B2[j - 1]
        out = max(out, o1, o2)
    if out > 0.0:
        bound = min(bound, dx * dx / out)
    if wmax > 0.0:
        bound = min(bound, dx * dx / wmax)
    return bound


@njit(cache=True)
def _clip(rho, dx):
    """Zero out negative cells and rescale to the pre-clip mass; returns (count, relative deficit)."""
    count = 0
    before = 0.0
    neg = 0.0
    for j in range(rho.size):
        before += rho[j]
        if rho[j] < 0.0:
            neg -= rho[j]
            rho[j] = 0.0
            count += 1
    if count == 0:
        return 0, 0.0
    after = before + neg
    scale = before / after
    for j in range(rho.size):
        rho[j] *= scale
    return count, neg * dx


@njit(cache=True)
def advance(
    rho1, rho2, V1, V2, kind, alpha, lam, eta, dx, t, t_end, safety, max_deficit,
    log_t, log_dt, log_e, log_d, log_clip, start,
):
    """Forward Euler steps from t to t_end, logging (t, dt, E, D, clips) at the start of each step.

    Returns (status, t, number of log rows used, worst clip deficit).
    """
    n = rho1.size
    fp = np.empty(n)
    lr1 = np.empty(n)
    lr2 = np.empty(n)
    J1 = np.empty(n + 1)
    J2 = np.empty(n + 1)
    A1 = np.empty(n - 1)
    B1 = np.empty(n - 1)
    A2 = np.empty(n - 1)
    B2 = np.empty(n - 1)
    k = start
    worst = 0.0
    while t < t_end:
        if k >= log_t.size:
            return BUFFER_FULL, t, k, worst
        _prepare(rho1, rho2, V1, V2, kind, alpha, lam, eta, dx, fp, lr1, lr2, J1, J2, A1, B1, A2, B2)
        dt = safety * _stable_dt(rho1, rho2, kind, alpha, lam, eta, dx, A1, B1, A2, B2)
        if not (dt > 0.0) or not math.isfinite(dt):
            return NONFINITE, t, k, worst
        last = False
        if t + dt >= t_end or t_end - (t + dt) < 1e-12 * dt:
            dt = t_end - t
            last = True
        log_t[k] = t
        log_dt[k] = dt
        log_e[k] = _energy(rho1, rho2, V1, V2, kind, alpha, lam, eta, dx)
        log_d[k] = _dissipation(V1, V2, eta, fp, lr1, lr2, J1, J2)
        r = dt / dx
        for j in range(n):
            rho1[j] -= r * (J1[j + 1] - J1[j])
            rho2[j] -= r * (J2[j + 1] - J2[j])
        c1, d1 = _clip(rho1, dx)
        c2, d2 = _clip(rho2, dx)
        log_clip[k] = c1 + c2
        worst = max(worst, d1, d2)
        k += 1
        if d1 > max_deficit or d2 > max_deficit:
            return SCHEME_FAILURE, t + dt, k, worst
        for j in range(n):
            if not math.isfinite(rho1[j]) or not math.isfinite(rho2[j]):
                return NONFINITE, t + dt, k, worst
        t = t_end if last else t + dt
    return OK, t, k, worst


@njit(cache=True)
def energy_dissipation(rho1, rho2, V1, V2, kind, alpha, lam, eta, dx):
    n = rho1.size
    fp = np.empty(n)
    lr1 = np.empty(n)
    lr2 = np.empty(n)
    J1 = np.empty(n + 1)
    J2 = np.empty(n + 1)
    A1 = np.empty(n - 1)
    B1 = np.empty(n - 1)
    A2 = np.empty(n - 1)
    B2 = np.empty(n - 1)
    _prepare(rho1, rho2, V1, V2, kind, alpha, lam, eta, dx, fp, lr1, lr2, J1, J2, A1, B1, A2, B2)
    return _energy(rho1, rho2, V1, V2, kind, alpha, lam, eta, dx), _dissipation(V1, V2, eta, fp, lr1, lr2, J1, J2)
