"""Spatially homogeneous stationary state of the one-component model.

The stationary density in activity ``s`` is a Gaussian truncated at ``s = 0``
centred on ``Phi0 = Phi(W0 * rho_bar + B)`` with variance ``1/kappa``; its
mean ``rho_bar`` solves a scalar fixed-point equation handled here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.interpolate import PchipInterpolator

from . import kernels
from .errors import BracketError, ConfigError, MissingDerivativeError

GAIN_KINDS = ("relu", "smooth_tanh", "user_table")


@dataclass(frozen=True)
class GainFunction:
    """Gain (modulation) function Phi with derivatives up to third order.

    ``relu``: ``slope * max(x, 0)``.
    ``smooth_tanh``: ``gain * x * (1 + x / sqrt(x^2 + eps))`` for ``x > 0`` and
    0 otherwise (``x/sqrt(x^2+eps)`` is a smooth sign switch).
    ``user_table``: monotone cubic interpolation of ``(x, phi)`` samples.

    Derivatives at the kink ``x = 0`` are one-sided from the right.
    """

    kind: str = "smooth_tanh"
    params: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in GAIN_KINDS:
            raise ConfigError(f"unknown gain kind {self.kind!r}")
        if self.kind == "user_table":
            xs = np.asarray(self.params.get("x", []), dtype=float)
            ys = np.asarray(self.params.get("phi", []), dtype=float)
            if xs.size < 2 or xs.shape != ys.shape:
                raise ConfigError("user_table gain needs matching 'x' and 'phi' samples")
            if np.any(np.diff(xs) <= 0) or np.any(np.diff(ys) < 0):
                raise ConfigError("user_table gain must be sampled on increasing x with nondecreasing phi")
            if np.any(ys[xs <= 0] != 0):
                raise ConfigError("user_table gain must vanish on x <= 0")
            object.__setattr__(self, "_interp", PchipInterpolator(xs, ys, extrapolate=True))
        elif self.kind == "relu":
            if self._p("slope", 1.0) <= 0:
                raise ConfigError("relu slope must be positive")
        else:
            if self._p("gain", 0.5) <= 0 or self._p("eps", 0.1) <= 0:
                raise ConfigError("smooth_tanh gain and eps must be positive")

    def _p(self, name, default):
        return float(self.params.get(name, default))

    @property
    def has_third_derivative(self) -> bool:
        return self.kind != "user_table"

    def derivative_right_of_zero(self) -> float:
        """Right limit of Phi' at 0 (the left limit is 0 by construction)."""
        return float(self.d1(0.0))

    def is_c1(self) -> bool:
        return self.derivative_right_of_zero() == 0.0

    def __call__(self, x):
        return self.evaluate(x, 0)

    def d1(self, x):
        return self.evaluate(x, 1)

    def d2(self, x):
        return self.evaluate(x, 2)

    def d3(self, x):
        return self.evaluate(x, 3)

    def evaluate(self, x, order: int = 0):
        """Phi or its ``order``-th derivative, vectorised over ``x``."""
        arr = np.asarray(x, dtype=float)
        pos = arr >= 0.0
        if self.kind == "relu":
            slope = self._p("slope", 1.0)
            if order == 0:
                out = slope * np.maximum(arr, 0.0)
            elif order == 1:
                out = np.where(pos, slope, 0.0)
            else:
                out = np.zeros_like(arr)
        elif self.kind == "smooth_tanh":
            a, eps = self._p("gain", 0.5), self._p("eps", 0.1)
            xp = np.maximum(arr, 0.0)
            s = np.sqrt(xp * xp + eps)
            if order == 0:
                out = a * (xp + xp * xp / s)
            elif order == 1:
                out = a * (1.0 + (xp**3 + 2.0 * eps * xp) / s**3)
            elif order == 2:
                out = a * eps * (2.0 * eps - xp * xp) / s**5
            elif order == 3:
                out = 3.0 * a * eps * xp * (xp * xp - 4.0 * eps) / s**7
            else:
                raise ValueError("order must be 0..3")
            if order:
                out = np.where(pos, out, 0.0)
        else:
            if order == 3:
                raise MissingDerivativeError("user_table gain has no third derivative")
            xp = np.maximum(arr, 0.0)
            out = self._interp(xp, order) if order else self._interp(xp)
            out = np.where(arr > 0.0, out, 0.0) if order == 0 else np.where(pos, out, 0.0)
        return float(out) if np.ndim(out) == 0 else out

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": dict(self.params)}


@dataclass(frozen=True)
class ModelParams:
    """Torus side ``L``, dimension ``d``, input ``B``, time constant ``tau`` (ms),
    gain ``phi`` and the mean ``W0`` of the connectivity potential."""

    L: float
    d: int
    B: float
    W0: float
    phi: GainFunction = field(default_factory=GainFunction)
    tau: float = 10.0

    def __post_init__(self):
        for name in ("L", "B", "W0", "tau"):
            if not math.isfinite(getattr(self, name)):
                raise ConfigError(f"{name} must be finite")
        if self.L <= 0:
            raise ConfigError("L must be positive")
        if int(self.d) != self.d or self.d < 1:
            raise ConfigError("d must be an integer >= 1")
        if self.B <= 0:
            raise ConfigError("B must be positive")
        if self.W0 >= 0:
            raise ConfigError("W0 must be negative")
        if self.tau <= 0:
            raise ConfigError("tau must be positive")

    @property
    def Ld(self) -> float:
        return self.L**self.d


@dataclass(frozen=True)
class HomogeneousState:
    kappa: float
    rho_bar_inf: float
    phi0: float
    phi0p: float
    phi0pp: float
    phi0ppp: float
    rho_inf_at_zero: float
    d_rho_bar_d_kappa: float
    closed_form: bool = False

    @property
    def eta(self) -> float:
        return math.sqrt(self.kappa / 2.0) * self.phi0

    @property
    def g(self) -> float:
        return kernels.g_eta(self.eta)

    @property
    def excess(self) -> float:
        """rho_bar - Phi0/L^d, computed without cancellation."""
        return self.rho_inf_at_zero / self.kappa


def kappa_c(params: ModelParams) -> float:
    """Largest kappa for which the homogeneous state is the closed-form one."""
    return 2.0 * params.W0**2 / (params.L ** (2 * params.d) * math.pi * params.B**2)


def mean_activity(P, kappa: float, Ld: float):
    """Mean of the stationary density with centre ``P`` (>= 0), per unit mass 1/L^d."""
    eta = np.sqrt(kappa / 2.0) * np.asarray(P, dtype=float)
    return (math.sqrt(2.0 / kappa) * np.asarray(kernels.f_eta(eta)) + P) / Ld


def residual(params: ModelParams, kappa: float, y: float) -> float:
    """G~(y, kappa) = y - mean activity of the state driven by Phi(W0 y + B)."""
    P = params.phi(params.W0 * y + params.B)
    return y - float(mean_activity(P, kappa, params.Ld))


def _residual_slope(params: ModelParams, kappa: float, y: float) -> float:
    u = params.W0 * y + params.B
    P = params.phi(u)
    g = kernels.g_eta(math.sqrt(kappa / 2.0) * P)
    return 1.0 - params.phi.d1(u) * g * params.W0 / params.Ld


def solve_rho_bar_inf(params: ModelParams, kappa: float) -> HomogeneousState:
    """Unique homogeneous stationary mean activity and derived quantities."""
    if not kappa > 0 or not math.isfinite(kappa):
        raise ConfigError("kappa must be positive and finite")
    Ld = params.Ld
    closed = Ld**-1 * math.sqrt(2.0 / (kappa * math.pi))
    if kappa <= kappa_c(params):
        rho = closed
        # Phi vanishes identically left of the kink
        return HomogeneousState(
            kappa=kappa,
            rho_bar_inf=rho,
            phi0=0.0,
            phi0p=0.0,
            phi0pp=0.0,
            phi0ppp=0.0,
            rho_inf_at_zero=rho * kappa,
            d_rho_bar_d_kappa=-rho / (2.0 * kappa),
            closed_form=True,
        )

    hi = max(params.B / abs(params.W0), closed)
    hi += 1e-9 * hi
    lo = 0.0
    r_lo, r_hi = residual(params, kappa, lo), residual(params, kappa, hi)
    if not (r_lo < 0.0 < r_hi):
        raise BracketError(
            f"no sign change of the homogeneous residual on [0, {hi:.6g}] at kappa={kappa:.6g}; "
            "check B > 0, W0 < 0 and the gain"
        )
    width = max(1e-14, 4 * np.finfo(float).eps * hi)
    while hi - lo > width:
        mid = 0.5 * (lo + hi)
        r_mid = residual(params, kappa, mid)
        if r_mid == 0.0:
            lo = hi = mid
            break
        if r_mid < 0.0:
            lo = mid
        else:
            hi = mid
    y = 0.5 * (lo + hi)
    r = residual(params, kappa, y)
    for _ in range(2):
        step = r / _residual_slope(params, kappa, y)
        y_new = y - step
        if not lo - width <= y_new <= hi + width:
            break
        r_new = residual(params, kappa, y_new)
        if abs(r_new) > abs(r):
            break
        y, r = y_new, r_new
    return _state_from_mean(params, kappa, y)


def _state_from_mean(params: ModelParams, kappa: float, rho: float) -> HomogeneousState:
    Ld = params.Ld
    u0 = params.W0 * rho + params.B
    phi = params.phi
    phi0, phi0p, phi0pp = phi(u0), phi.d1(u0), phi.d2(u0)
    phi0ppp = phi.d3(u0) if phi.has_third_derivative else math.nan
    eta = math.sqrt(kappa / 2.0) * phi0
    rho0 = math.sqrt(2.0 * kappa) * kernels.f_eta(eta) / Ld
    g = kernels.g_eta(eta)
    excess = rho0 / kappa
    drho = -(1.0 + Ld * phi0 * rho * kappa) * excess / (2.0 * kappa * (1.0 - phi0p * g * params.W0 / Ld))
    return HomogeneousState(
        kappa=kappa,
        rho_bar_inf=rho,
        phi0=phi0,
        phi0p=phi0p,
        phi0pp=phi0pp,
        phi0ppp=phi0ppp,
        rho_inf_at_zero=rho0,
        d_rho_bar_d_kappa=drho,
    )


def d_rho_bar_d_kappa(state: HomogeneousState, params: ModelParams) -> float:
    """Closed-form derivative of the homogeneous mean with respect to kappa (<= 0)."""
    if state.closed_form:
        return -state.rho_bar_inf / (2.0 * state.kappa)
    Ld, k = params.Ld, state.kappa
    denom = 1.0 - state.phi0p * state.g * params.W0 / Ld
    return -(1.0 + Ld * state.phi0 * state.rho_bar_inf * k) * state.excess / (2.0 * k * denom)


# large-kappa proxy for the limit kappa -> infinity
KAPPA_LIMIT = 1e8


def asymptotic_limits(params: ModelParams) -> tuple[float, float]:
    """(rho_star, phi_star): limits of rho_bar and Phi0 as the noise vanishes."""
    state = solve_rho_bar_inf(params, KAPPA_LIMIT)
    rho_star = state.rho_bar_inf
    return rho_star, params.phi(params.W0 * rho_star + params.B)


def stationary_density(state: HomogeneousState, params: ModelParams, s):
    """rho_inf(s) = Z^-1 exp(-kappa (s - Phi0)^2 / 2) on s >= 0."""
    s = np.asarray(s, dtype=float)
    k, P = state.kappa, state.phi0
    # Z = L^d sqrt(pi/(2k)) (1 + erf(P sqrt(k/2)))
    log_z = math.log(params.Ld) + 0.5 * math.log(math.pi / (2 * k)) + math.log1p(kernels.erf(P * math.sqrt(k / 2)))
    return np.exp(-0.5 * k * (s - P) ** 2 - log_z)
