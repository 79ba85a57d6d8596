"""Compiled per-column kernels for the s-step, written for the deviation
dev = rho - base from the discrete steady column ``base``.

Face flux: J(rho; P) = alpha(P) rho_j - beta(P) rho_{j+1}. With the drive
P = P0 + dP the flux of the full column is split as
J(base; P0) + [J(base; P) - J(base; P0)] + J(dev; P), the bracket being
computed from coefficient differences so that tiny deviations keep their
relative precision.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

_TAYLOR_H = 1e-5


@njit(cache=True, inline="always")
def _bern(x):
    # B(x) = x/(exp(x)-1) and B'(x) = B(x)(1-B(x)-x)/x
    if abs(x) < 1e-3:
        return 1.0 - 0.5 * x + x * x / 12.0, -0.5 + x / 6.0 - x * x * x / 180.0
    b = x / math.expm1(x)
    return b, b * (1.0 - b - x) / x


@njit(cache=True, inline="always")
def _bern_step(x, h):
    """B(x + h) - B(x) without cancellation for small h."""
    if abs(h) < _TAYLOR_H:
        b, b1 = _bern(x)
        if abs(x) < 1e-2:
            b2 = 1.0 / 6.0 - x * x / 60.0
        else:
            b2 = (-b1 * (2.0 * b + x) - b) / x
        return h * (b1 + 0.5 * h * b2)
    return _bern(x + h)[0] - _bern(x)[0]


@njit(cache=True, inline="always")
def _pos_step(a, h):
    """max(a + h, 0) - max(a, 0), exact when no sign change."""
    if a > 0.0 and a + h > 0.0:
        return h
    if a <= 0.0 and a + h <= 0.0:
        return 0.0
    return max(a + h, 0.0) - max(a, 0.0)


@njit(cache=True, inline="always")
def _faces(P0, dP, j, s_mid, edges, delta, sigma, sg):
    """alpha, beta, their P-derivatives and increments from P0 to P0 + dP at face j."""
    k = sigma / delta[j]
    if sg:
        pe0 = (P0 - s_mid[j]) * delta[j] / sigma
        h = dP * delta[j] / sigma
        pe = pe0 + h
        bp, dbp = _bern(pe)
        db = _bern_step(pe0, h)
        # B(-x) = B(x) + x, B'(-x) = -(B'(x) + 1)
        return k * (bp + pe), k * bp, 1.0 + dbp, dbp, k * (db + h), k * db
    a0 = P0 - edges[j]
    a = a0 + dP
    al = max(a, 0.0) + k
    be = -min(a, 0.0) + k
    dal = 1.0 if a > 0.0 else 0.0
    dbe = -1.0 if a < 0.0 else 0.0
    # -min(x, 0) = max(-x, 0)
    return al, be, dal, dbe, _pos_step(a0, dP), _pos_step(-a0, -dP)


@njit(cache=True)
def explicit_fluxes(dev, base, dP, P0, j_inf, s_mid, edges, delta, sigma, sg, F):
    """Face fluxes F[r] of base + dev[r] under the drive P0 + dP[r]."""
    R, ns = dev.shape
    for r in range(R):
        for j in range(ns - 1):
            al, be, _, _, dal, dbe = _faces(P0, dP[r], j, s_mid, edges, delta, sigma, sg)
            F[r, j] = (
                j_inf[j]
                + (dal * base[j] - dbe * base[j + 1])
                + (al * dev[r, j] - be * dev[r, j + 1])
            )


@njit(cache=True)
def implicit_columns(dev, base, dP, P0, j_inf, s_mid, edges, delta, ds, sigma, c, sg, eta, z, fy, gz):
    """Backward Euler in s for every row r at the frozen drive P = P0 + dP[r].

    Solves (I + c A(P)) y = rho with y = base + eta, and
    (I + c A(P)) z = c dA/dP rho, where rho = base + dev. Returns the face
    fluxes fy = J(y; P) and gz = dJ/dP(rho) - J(z; P), so that
    y = rho - c div(fy) and z = c div(gz).
    """
    R, ns = dev.shape
    nf = ns - 1
    al = np.empty(nf)
    be = np.empty(nf)
    dal = np.empty(nf)
    dbe = np.empty(nf)
    G = np.empty(nf)
    cp = np.empty(ns)
    for r in range(R):
        for j in range(nf):
            a, b, da, db, inc_a, inc_b = _faces(P0, dP[r], j, s_mid, edges, delta, sigma, sg)
            al[j] = a
            be[j] = b
            dal[j] = da
            dbe[j] = db
            G[j] = j_inf[j] + (inc_a * base[j] - inc_b * base[j + 1])
        # (I + cA) eta = dev - c div(J(base; P)); forward sweep on both right-hand sides
        prev_b = 0.0
        prev_y = 0.0
        prev_c = 0.0
        for j in range(ns):
            h = c / ds[j]
            dj = 1.0
            bj = 0.0
            rj = dev[r, j]
            lo = 0.0
            up = 0.0
            if j < nf:
                dj += h * al[j]
                up = -h * be[j]
                bj += dal[j] * (base[j] + dev[r, j]) - dbe[j] * (base[j + 1] + dev[r, j + 1])
                rj -= h * G[j]
            if j > 0:
                dj += h * be[j - 1]
                lo = -h * al[j - 1]
                bj -= dal[j - 1] * (base[j - 1] + dev[r, j - 1]) - dbe[j - 1] * (base[j] + dev[r, j])
                rj += h * G[j - 1]
            bj *= h
            m = dj - lo * prev_c
            cp[j] = up / m
            eta[r, j] = (rj - lo * prev_y) / m
            z[r, j] = (bj - lo * prev_b) / m
            prev_c = cp[j]
            prev_y = eta[r, j]
            prev_b = z[r, j]
        for j in range(ns - 2, -1, -1):
            eta[r, j] -= cp[j] * eta[r, j + 1]
            z[r, j] -= cp[j] * z[r, j + 1]
        for j in range(nf):
            fy[r, j] = G[j] + al[j] * eta[r, j] - be[j] * eta[r, j + 1]
            gz[r, j] = (
                dal[j] * (base[j] + dev[r, j])
                - dbe[j] * (base[j + 1] + dev[r, j + 1])
                - (al[j] * z[r, j] - be[j] * z[r, j + 1])
            )
