"""Threshold function, mode crossings, validation and branch coefficients.

A mode class with effective ratio r = W~(k) * factor / Theta(k) bifurcates
from the homogeneous branch where psi(kappa) = r.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from . import connectivity as conn
from . import kernels
from .errors import AliasingError, ConfigError, DomainError, MissingDerivativeError, NoCrossingError
from .homogeneous import (
    GainFunction,
    HomogeneousState,
    ModelParams,
    asymptotic_limits,
    kappa_c,
    solve_rho_bar_inf,
)
from .oracle import frechet_fd_oracle

SCAN_POINTS = 512
EIGEN_TOL = 1e-8
TIE_TOL = 1e-9
DISCREPANCY_TOL = 1e-3
LABEL_TOL = 1e-12


class BranchDiscrepancyWarning(UserWarning):
    """Closed-form third derivative disagrees with the finite-difference oracle."""


def model_params(W: conn.Potential, B: float, phi: GainFunction | None = None, tau: float = 10.0) -> ModelParams:
    """ModelParams with W0 taken from the sampled potential."""
    return ModelParams(L=W.L, d=W.d, B=B, W0=W.mean(), phi=phi or GainFunction(), tau=tau)


# threshold function


def psi(params: ModelParams, kappa: float, state: HomogeneousState | None = None) -> float:
    """psi(kappa) = L^{d/2} / (Phi0' g(eta))."""
    if kappa <= kappa_c(params):
        raise DomainError(f"psi is +inf for kappa <= kappa_c = {kappa_c(params):.6g}")
    state = state or solve_rho_bar_inf(params, kappa)
    if state.phi0p <= 0:
        raise DomainError(f"Phi'(u0) = {state.phi0p} at kappa={kappa}")
    return params.L ** (params.d / 2) / (state.phi0p * state.g)


def psi_raw(params: ModelParams, kappa: float) -> float:
    """psi written as 1/(L^{d/2} Phi0' (1/L^d - L^d rho (rho - Phi0/L^d) kappa))."""
    if kappa <= kappa_c(params):
        raise DomainError(f"psi is +inf for kappa <= kappa_c = {kappa_c(params):.6g}")
    s = solve_rho_bar_inf(params, kappa)
    Ld = params.Ld
    rho = s.rho_bar_inf
    return 1.0 / (params.L ** (params.d / 2) * s.phi0p * (1 / Ld - Ld * rho * (rho - s.phi0 / Ld) * kappa))


def psi_limit(params: ModelParams) -> float:
    """lim psi as kappa -> infinity: L^{d/2} / Phi'(W0 rho* + B)."""
    rho_star, _ = asymptotic_limits(params)
    return params.L ** (params.d / 2) / params.phi.d1(params.W0 * rho_star + params.B)


def psi_cap(params: ModelParams) -> float:
    """lim psi as kappa -> kappa_c+; finite only when Phi'(0+) > 0."""
    dp = params.phi.derivative_right_of_zero()
    if dp <= 0:
        return math.inf
    return math.pi * params.L ** (params.d / 2) / ((math.pi - 2) * dp)


def eigenvalue(params: ModelParams, state: HomogeneousState, effective_ratio: float) -> float:
    """lambda = 1 - L^{d/2} Phi0' (W~ factor / Theta) g / L^d."""
    return 1.0 - params.L ** (params.d / 2) * state.phi0p * effective_ratio * state.g / params.Ld


# crossings


@dataclass(frozen=True)
class BranchCoefficients:
    c1: float
    c2: float
    a3: float
    k3: float
    k1: float
    k2: float
    kappa_pp0: float
    label: str
    k1_intermediate: float
    kappa_pp0_intermediate: float
    k1_exact: float
    k2_exact: float
    k1_fd: float | None = None
    kappa_pp0_fd: float | None = None
    discrepancy: float | None = None
    warning: str | None = None
    kappa_pp0_full: float | None = None
    label_full: str | None = None


@dataclass(frozen=True)
class BifurcationPoint:
    mode: conn.ModeClass
    kappa_star: float
    residual: float
    unique_in_kappa: bool = True
    kernel_dim: int = 0
    validation: dict = field(default_factory=dict)
    coeffs: BranchCoefficients | None = None


@dataclass(frozen=True)
class Rejection:
    mode: conn.ModeClass
    reason: str


def scan_grid(params: ModelParams, kappa_max: float, points: int = SCAN_POINTS):
    """(kappas, psi values) on the log grid over (kappa_c (1 + 1e-6), kappa_max]."""
    lo = kappa_c(params) * (1 + 1e-6)
    if kappa_max <= lo:
        return np.array([]), np.array([])
    kappas = np.geomspace(lo, kappa_max, points)
    return kappas, np.array([psi(params, k) for k in kappas])


def find_crossings(
    W: conn.Potential,
    params: ModelParams,
    k_max: int,
    kappa_max: float = 1e4,
    exchangeable: str = "auto",
    shifts=None,
    classes=None,
):
    """All (class, kappa*) with psi(kappa*) = effective ratio, sorted by kappa*.

    Returns (points, rejections); rejections carry a reason: below_limit,
    above_cap or beyond_kappa_max.
    """
    if classes is None:
        classes = conn.mode_table(W, k_max, exchangeable=exchangeable, shifts=shifts)
    limit = psi_limit(params)
    cap = psi_cap(params)
    kappas, values = scan_grid(params, kappa_max)

    points, rejections = [], []
    for mc in classes:
        target = mc.effective_ratio
        if target <= limit:
            rejections.append(Rejection(mc, "below_limit"))
            continue
        if target >= cap:
            rejections.append(Rejection(mc, "above_cap"))
            continue
        diff = values - target
        idx = np.nonzero(np.sign(diff[:-1]) * np.sign(diff[1:]) <= 0)[0]
        roots = []
        for i in idx:
            if diff[i] == 0 and i > 0 and (i - 1) in idx:
                continue
            a, b = kappas[i], kappas[i + 1]
            if diff[i] == 0:
                ks = a
            elif diff[i + 1] == 0:
                ks = b
            else:
                ks = brentq(lambda kk: psi(params, kk) - target, a, b, xtol=1e-14 * b, rtol=4 * np.finfo(float).eps, maxiter=200)
            roots.append(ks)
        roots = sorted(set(roots))
        if not roots:
            rejections.append(Rejection(mc, "beyond_kappa_max"))
            continue
        for ks in roots:
            res = abs(psi(params, ks) - target) / abs(target)
            points.append(BifurcationPoint(mc, float(ks), float(res), unique_in_kappa=len(roots) == 1))

    points.sort(key=lambda p: (p.kappa_star, p.mode.class_id))
    return points, rejections


def kernel_dimension(params: ModelParams, kappa: float, classes) -> tuple[int, list]:
    """Number of classes with |lambda| <= 1e-8 at kappa, and the eigenvalue table.

    The table lists (representative, members, lambda) for every class plus k = 0.
    """
    state = solve_rho_bar_inf(params, kappa)
    table = []
    dim = 0
    for mc in classes:
        lam = eigenvalue(params, state, mc.effective_ratio)
        table.append((mc.representative, mc.members, lam))
        if abs(lam) <= EIGEN_TOL and any(mc.representative):
            dim += 1
    return dim, table


def relaxed_convexity_bound(params: ModelParams, state: HomogeneousState) -> float:
    """Right-hand side of the sufficient inequality replacing Phi0'' >= 0."""
    Ld, B, W0 = params.Ld, params.B, params.W0
    p0, p1 = state.phi0, state.phi0p
    return (
        2 * (4 - math.pi) / (math.pi - 2)
        * p0 * p1 / (Ld**2 * math.pi * B**2)
        * (Ld - p1 * W0 * (1 - 2 / math.pi))
        / (1 + p0 * (p0 + Ld * B / abs(W0)))
        * W0
    )


def a3_value(state: HomogeneousState) -> float:
    """A3 = 1 - L^{2d} rho^2 kappa / g = 1 - 2 (f + eta)^2 / g."""
    eta = state.eta
    return 1.0 - 2.0 * (kernels.f_eta(eta) + eta) ** 2 / state.g


def validate_point(pt: BifurcationPoint, params: ModelParams, classes) -> dict:
    state = solve_rho_bar_inf(params, pt.kappa_star)
    target = pt.mode.effective_ratio
    ties = [
        mc for mc in classes
        if mc is not pt.mode and abs(mc.effective_ratio - target) <= TIE_TOL * abs(target)
    ]
    dim, _ = kernel_dimension(params, pt.kappa_star, classes)
    a3 = a3_value(state)
    bound = relaxed_convexity_bound(params, state)
    flags = {
        "unique_mode": not ties and dim == 1,
        "phi_convexity_ok": state.phi0pp >= 0,
        "relaxed_condition_ok": state.phi0pp > bound,
        "transversality_ok": a3 < 0,
        "in_range": pt.kappa_star > kappa_c(params),
        "unique_in_kappa": pt.unique_in_kappa,
    }
    flags["validated"] = (
        flags["unique_mode"]
        and (flags["phi_convexity_ok"] or flags["relaxed_condition_ok"])
        and flags["transversality_ok"]
        and flags["in_range"]
    )
    return flags


def _label(kpp: float, scale: float) -> str:
    if kpp > LABEL_TOL * scale:
        return "supercritical"
    if kpp < -LABEL_TOL * scale:
        return "subcritical"
    return "degenerate"


def _q_derivatives(params: ModelParams, state: HomogeneousState):
    """First three derivatives of u -> mean activity of the state driven by Phi(u)."""
    g, g1, g2 = kernels.g_derivatives(state.eta)
    r = math.sqrt(state.kappa / 2.0)
    m1, m2, m3 = g / params.Ld, g1 * r / params.Ld, g2 * r * r / params.Ld
    p1, p2, p3 = state.phi0p, state.phi0pp, state.phi0ppp
    return m1 * p1, m2 * p1**2 + m1 * p2, m3 * p1**3 + 3 * m2 * p1 * p2 + m1 * p3


def k2_exact(params: ModelParams, s: HomogeneousState) -> float:
    """d lambda_k / d kappa at a crossing (where L^{d/2} W~/Theta = psi)."""
    drho = s.d_rho_bar_d_kappa
    return -(s.phi0pp * params.W0 / s.phi0p) * drho + params.Ld * (
        s.phi0 / 2 + s.kappa * s.phi0p * params.W0 * drho
    ) * a3_value(s) * s.excess


def branch_curvature(W: conn.Potential, params: ModelParams, pt: BifurcationPoint, n: int | None = None) -> dict:
    """kappa''(0) of the bifurcating branch with the second-order correction.

    With F(rho) = rho - q(W * rho + B) and kernel vector v, the reduced equation
    gives kappa''(0) = -(F3 + 6 <F_xx[v, w2], v>) / (3 dlambda/dkappa), where
    F3 = <D^3F[v,v,v], v> and F_x w2 = -F_xx[v,v]/2 is solved mode by mode.
    """
    n = n or W.n
    s = solve_rho_bar_inf(params, pt.kappa_star)
    q1, q2, q3 = _q_derivatives(params, s)
    mc = pt.mode
    dA = W.cell_volume(n)
    v = sum(conn.omega_grid(m, n, W.L) for m in mc.members) / math.sqrt(mc.card)
    mult = np.fft.fftn(W.grid(n)).real * dA
    c1 = params.L ** (params.d / 2) * mc.effective_ratio
    f3 = -q3 * c1**3 * float(np.sum(v**4)) * dA
    lam = 1.0 - q1 * mult
    rhs_hat = np.fft.fftn(0.5 * q2 * c1**2 * v**2)
    # the forcing has no kernel component; drop roundoff on (near-)kernel modes
    live = np.abs(lam) > 1e-10
    w2_hat = np.where(live, rhs_hat / np.where(live, lam, 1.0), 0.0)
    conv_w2 = np.fft.ifftn(w2_hat * mult).real
    corr = -q2 * c1 * float(np.sum(v * v * conv_w2)) * dA
    k2 = k2_exact(params, s)
    kpp = -(f3 + 6.0 * corr) / (3.0 * k2)
    return {"f3": f3, "correction": 6.0 * corr, "k2": k2, "kappa_pp0": kpp}


def branch_coefficients(
    pt: BifurcationPoint,
    params: ModelParams,
    W: conn.Potential | None = None,
    check_fd: bool = True,
) -> BranchCoefficients:
    """C1, C2, A3, K1, K2, K3 and kappa''(0) at a crossing.

    ``k1``, ``k2``, ``kappa_pp0`` = -k1/(3 k2) and ``label`` follow the closed
    forms as printed. ``k1_intermediate`` keeps the positive C2 = (1 - g)/g of the
    preceding derivation step. ``k1_exact`` is the exact third derivative
    -q3 C1^3 |omega^2|^2 and ``k2_exact`` the kappa-derivative of the eigenvalue.
    When ``W`` is given, ``kappa_pp0_full``/``label_full`` carry the curvature with
    the second-order correction (see branch_curvature) and, with ``check_fd``,
    the third derivative is also computed by finite differences; a
    BranchDiscrepancyWarning is emitted if it disagrees with the printed K1
    beyond 1e-3 relative.
    """
    if not params.phi.has_third_derivative:
        raise MissingDerivativeError("branch coefficients need Phi''' (not available for user_table gains)")
    s = solve_rho_bar_inf(params, pt.kappa_star)
    mc = pt.mode
    L, d, Ld, k = params.L, params.d, params.Ld, pt.kappa_star
    Lh = L ** (d / 2)
    wt = mc.w_tilde * mc.four_comp_factor
    th = mc.theta
    rho, e, r0 = s.rho_bar_inf, s.excess, s.rho_inf_at_zero
    p1, p2, p3 = s.phi0p, s.phi0pp, s.phi0ppp
    g = s.g
    members = mc.members if mc.card > 1 else None
    nsq = conn.norm_omega_sq(list(mc.members), L)

    c1 = Lh * wt / th
    c2 = math.exp(kernels.log_one_minus_g(s.eta)) / g
    a3 = a3_value(s)
    k3 = 1.0 - Ld * rho * k * p1 * c1
    drho = s.d_rho_bar_d_kappa
    k2 = -(p2 * params.W0 / p1) * drho + Ld * (s.phi0 / 2 + p1 * params.W0 * drho) * a3 * e

    k1 = (
        -p3 / p1
        + 2 * p2 * Ld * k3 * r0
        + p1 * Ld * (
            -(2 * Lh * th / wt - 2 * p1 / Ld + rho * p2 * Lh * wt / th) * k
            + (r0 / k) * (p2 / p1 - p1 * Ld * k3 * r0)
        )
    ) * Ld * wt**2 / th**2 * nsq

    k1_int = (
        -p3 / p1 * c1**2
        + 2 * p2 * Ld * a3 * c1**2 * e * k
        + p1 * Ld * (-(2 * c2 + rho * p2 * c1**2) * k + e * (p2 / p1 - p1 * Ld * a3 * e * k)) * c1
    ) * nsq
    k1_ex = -_q_derivatives(params, s)[2] * c1**3 * nsq

    kpp = -k1 / (3 * k2)
    kpp_int = -k1_int / (3 * k2)
    scale = max(abs(k1), 1.0) / abs(k2)

    k1_fd = kpp_fd = disc = None
    warn = None
    kpp_full = label_full = None
    if W is not None:
        full = branch_curvature(W, params, pt)
        kpp_full = full["kappa_pp0"]
        label_full = _label(kpp_full, max(abs(full["f3"]), abs(full["correction"]), 1.0) / abs(full["k2"]))
        if check_fd:
            rep = mc.representative
            k1_fd = frechet_fd_oracle(W, params, k, rep, 3, members=[list(m) for m in members] if members else None)
            kpp_fd = -k1_fd / (3 * k2)
            disc = abs(k1 - k1_fd) / max(abs(k1_fd), 1e-300)
            if disc > DISCREPANCY_TOL:
                warn = (
                    f"printed K1={k1:.6g} differs from the finite-difference third derivative {k1_fd:.6g} "
                    f"(relative {disc:.3g}); C2 sign ambiguity, see k1_exact and kappa_pp0_full"
                )
                warnings.warn(warn, BranchDiscrepancyWarning, stacklevel=2)

    return BranchCoefficients(
        c1=c1,
        c2=c2,
        a3=a3,
        k3=k3,
        k1=k1,
        k2=k2,
        kappa_pp0=kpp,
        label=_label(kpp, scale),
        k1_intermediate=k1_int,
        kappa_pp0_intermediate=kpp_int,
        k1_exact=k1_ex,
        k2_exact=k2_exact(params, s),
        k1_fd=k1_fd,
        kappa_pp0_fd=kpp_fd,
        discrepancy=disc,
        warning=warn,
        kappa_pp0_full=kpp_full,
        label_full=label_full,
    )


def analyse(
    W: conn.Potential,
    params: ModelParams,
    k_max: int,
    kappa_max: float = 1e4,
    exchangeable: str = "auto",
    shifts=None,
    coefficients: bool = True,
    check_fd: bool = True,
    max_points: int | None = None,
):
    """find_crossings + kernel_dimension + validate_point + branch_coefficients."""
    classes = conn.mode_table(W, k_max, exchangeable=exchangeable, shifts=shifts)
    points, rejections = find_crossings(W, params, k_max, kappa_max, classes=classes)
    out = []
    for i, pt in enumerate(points):
        dim, _ = kernel_dimension(params, pt.kappa_star, classes)
        flags = validate_point(pt, params, classes)
        coeffs = None
        if coefficients and params.phi.has_third_derivative and (max_points is None or i < max_points):
            coeffs = branch_coefficients(pt, params, W, check_fd=check_fd and flags["validated"])
        out.append(BifurcationPoint(pt.mode, pt.kappa_star, pt.residual, pt.unique_in_kappa, dim, flags, coeffs))
    return out, rejections, classes


def linear_stability_threshold(W: conn.Potential, params: ModelParams, k_max: int, kappa_max: float = 1e4, **kw) -> float:
    """Smallest kappa* over all crossings."""
    points, _ = find_crossings(W, params, k_max, kappa_max, **kw)
    if not points:
        raise NoCrossingError("no mode crosses the threshold function; the homogeneous state stays linearly stable")
    return points[0].kappa_star


# patterns


PATTERN_PRESETS = {
    "superpose_2nd_3rd": [((4, 1), 1.0), ((1, 4), 1.0), ((3, 3), 1.0)],
    "superpose_1st_3rd": [((4, 0), 1.0), ((0, 4), 1.0), ((3, 3), 1.0)],
    "superpose_1st_2nd": [((4, 0), 1.0), ((0, 4), 1.0), ((4, 1), 1.0), ((1, 4), 1.0)],
    "hex": [
        ((3, 3), 1.0), ((4, 1), 1.0), ((1, 4), 1.0),
        ((3, 3), 1.0, "sin"), ((4, 1), 1.0, "sin"), ((1, 4), 1.0, "sin"),
    ],
}


def pattern_field(modes, grid_n: int, L: float = 1.0, normalized: bool = True) -> np.ndarray:
    """Sum of weight * omega_k(x) on the grid_n^d grid (x_j = j L / grid_n).

    Each entry is (k, weight) or (k, weight, "sin"); sine entries use the
    all-sine analogue of omega_k. With ``normalized`` false the weights multiply
    the bare products of cosines (or sines) instead.
    """
    modes = list(modes)
    if not modes:
        raise ConfigError("pattern needs at least one mode")
    d = len(modes[0][0])
    out = np.zeros((grid_n,) * d)
    for entry in modes:
        k, w = entry[0], float(entry[1])
        trig = entry[2] if len(entry) > 2 else "cos"
        if grid_n < 4 * max(max(k), 1):
            raise AliasingError(f"grid_n={grid_n} is below 4 * max component of {tuple(k)}")
        om = conn.omega_grid(k, grid_n, L, kind=trig)
        if not normalized:
            om = om * L ** (d / 2) / conn.theta(k)
        out += w * om
    return out


def preset_modes(name: str, k=None):
    """Mode list for a named preset: mode_k, class_k, the superpositions, hex."""
    if name in PATTERN_PRESETS:
        return PATTERN_PRESETS[name], False
    if name in ("mode_k", "class_k") and k is None:
        raise ConfigError(f"preset {name} needs a mode index k")
    if name == "mode_k":
        return [(tuple(k), 1.0)], True
    if name == "class_k":
        perms = sorted(set(itertools.permutations(tuple(k))))
        return [(p, 1.0 / math.sqrt(len(perms))) for p in perms], True
    raise ConfigError(f"unknown pattern preset {name!r}")
