"""Scalar erf-based kernels f, g, h and their derivatives.

All functions accept a float or a numpy array of nonnegative ``eta`` and
return the same shape. ``eta = sqrt(kappa/2) * Phi0``.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import special

SQRT_PI = math.sqrt(math.pi)
LOG_SQRT_PI = 0.5 * math.log(math.pi)

# beyond this erfcx(-eta) overflows; switch to log space
_LOG_SWITCH = 25.0


def _check(eta, nonneg=True):
    arr = np.asarray(eta, dtype=float)
    if np.any(np.isnan(arr)):
        raise ValueError("NaN input")
    if nonneg and np.any(arr < 0):
        raise ValueError("eta must be nonnegative")
    return arr


def _out(arr):
    return float(arr) if np.ndim(arr) == 0 else arr


def _f(arr):
    # erfcx(-eta) overflows for eta > ~26, where f underflows to 0 anyway
    with np.errstate(over="ignore"):
        return 1.0 / (SQRT_PI * special.erfcx(-arr))


def erf(x):
    """Gauss error function (total on the reals, odd)."""
    arr = _check(x, nonneg=False)
    return _out(special.erf(arr))


def log_f_eta(eta):
    """log f(eta), finite for every eta >= 0 (no underflow)."""
    arr = _check(eta)
    direct = -LOG_SQRT_PI - np.log(special.erfcx(-np.minimum(arr, _LOG_SWITCH)))
    # erfcx(-eta) = exp(eta^2) * (2 - erfc(eta))
    asympt = -LOG_SQRT_PI - arr**2 - np.log(2.0 - special.erfc(arr))
    return _out(np.where(arr > _LOG_SWITCH, asympt, direct))


def f_eta(eta):
    """f(eta) = exp(-eta^2) / (sqrt(pi) (1 + erf(eta)))."""
    arr = _check(eta)
    return _out(_f(arr))


def f_prime(eta):
    """f'(eta) = -2 f (f + eta)."""
    arr = _check(eta)
    f = _f(arr)
    return _out(-2.0 * f * (f + arr))


def g_eta(eta):
    """g(eta) = 1 - 2 f (f + eta); increasing from 1 - 2/pi towards 1."""
    arr = _check(eta)
    f = _f(arr)
    return _out(1.0 - 2.0 * f * (f + arr))


def log_one_minus_g(eta):
    """log(1 - g(eta)), accurate where g itself rounds to 1."""
    arr = _check(eta)
    lf = np.asarray(log_f_eta(arr))
    f = np.exp(lf)
    return _out(math.log(2.0) + lf + np.log(f + arr))


def h_eta(eta):
    """h(eta) = (f + eta)(2 f + eta); h(0) = 2/pi."""
    arr = _check(eta)
    f = _f(arr)
    return _out((f + arr) * (2.0 * f + arr))


def g_derivatives(eta):
    """Return (g, g', g'') at eta, using f' = -2f(f+eta) recursively."""
    arr = _check(eta)
    f = _f(arr)
    f1 = -2.0 * f * (f + arr)
    f2 = -2.0 * f1 * (f + arr) - 2.0 * f * (f1 + 1.0)
    g = 1.0 - 2.0 * f * (f + arr)
    g1 = -4.0 * f * f1 - 2.0 * f1 * arr - 2.0 * f
    g2 = -4.0 * f1 * f1 - 4.0 * f * f2 - 2.0 * arr * f2 - 4.0 * f1
    return _out(g), _out(g1), _out(g2)
