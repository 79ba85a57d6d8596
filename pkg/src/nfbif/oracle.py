"""Finite-difference Frechet derivatives of the mean functional.

G(rho_bar)(x) = rho_bar(x) - mean_s of the stationary density driven by
Phi(W * rho_bar(x) + B). The s-mean is computed here by Gauss-Legendre
quadrature of the Gaussian profile, independently of the erf-based closed
forms, so the oracle can check them.
"""

from __future__ import annotations

import math

import numpy as np

from . import connectivity as conn
from .errors import ConfigError, StepCollapseError
from .homogeneous import ModelParams, solve_rho_bar_inf

# 64 nodes on +-9 standard deviations: at roundoff for kappa in [1, 1e4]
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(64)
_HALF_WIDTH = 9.0


def quadrature_mean(P: np.ndarray, kappa: float, Ld: float) -> np.ndarray:
    """Mean of exp(-kappa (s-P)^2/2) on s >= 0, normalised to mass 1/Ld."""
    P = np.asarray(P, dtype=float)
    w = _HALF_WIDTH / math.sqrt(kappa)
    lo = np.maximum(P - w, 0.0)
    hi = P + w
    half = 0.5 * (hi - lo)
    s = lo[..., None] + half[..., None] * (_GL_NODES + 1.0)
    dens = _GL_WEIGHTS * np.exp(-0.5 * kappa * (s - P[..., None]) ** 2)
    return (dens * s).sum(-1) / dens.sum(-1) / Ld


def mean_functional(rho_bar: np.ndarray, W: conn.Potential, params: ModelParams, kappa: float) -> np.ndarray:
    u = W.convolve(rho_bar) + params.B
    return rho_bar - quadrature_mean(params.phi(u), kappa, params.Ld)


def _direction(W: conn.Potential, k, n: int, members=None) -> np.ndarray:
    if members is None:
        members = [k]
    return sum(conn.omega_grid(m, n, W.L) for m in members) / math.sqrt(len(members))


def _stencil(order: int, G, eps: float, rho: np.ndarray, v: np.ndarray) -> np.ndarray:
    if order == 1:
        return (G(rho + eps * v) - G(rho - eps * v)) / (2 * eps)
    if order == 2:
        return (G(rho + eps * v) - 2 * G(rho) + G(rho - eps * v)) / eps**2
    return (G(rho + 2 * eps * v) - 2 * G(rho + eps * v) + 2 * G(rho - eps * v) - G(rho - 2 * eps * v)) / (2 * eps**3)


def frechet_fd_oracle(
    W: conn.Potential,
    params: ModelParams,
    kappa: float,
    k,
    order: int,
    eps: float | None = None,
    members=None,
    tol: float = 1e-2,
) -> float:
    """<D^order G [omega, ..., omega], omega> by central differences with Richardson.

    The direction is omega_k (or the normalised class vector over ``members``).
    ``eps`` defaults to a step keeping W * rho_bar + B away from the kink of Phi.
    """
    if order not in (1, 2, 3):
        raise ConfigError("order must be 1, 2 or 3")
    n = W.n
    state = solve_rho_bar_inf(params, kappa)
    v = _direction(W, k, n, members)
    rho = np.full(v.shape, state.rho_bar_inf)
    dA = W.cell_volume(n)

    if eps is None:
        u0 = params.W0 * state.rho_bar_inf + params.B
        # amplitude of W * v, bounded by the largest |W~| times max|v|
        swing = float(np.max(np.abs(W.convolve(v)))) or 1.0
        eps = min(1e-2, 0.1 * max(u0, 1e-3) / swing) if u0 > 0 else 1e-2 / swing

    def G(r):
        return mean_functional(r, W, params, kappa)

    vals = []
    for h in (eps, eps / 2):
        vals.append(float(np.sum(_stencil(order, G, h, rho, v) * v) * dA))
    coarse, fine = vals
    # order-p central stencils have O(h^2) error
    extrap = (4 * fine - coarse) / 3
    scale = max(abs(fine), 1.0)
    if abs(coarse - fine) > tol * scale:
        raise StepCollapseError(
            f"order-{order} differences disagree: {coarse:.6g} (eps={eps:.3g}) vs {fine:.6g} (eps={eps / 2:.3g})"
        )
    return extrap
