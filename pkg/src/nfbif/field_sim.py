"""Finite-volume time stepping of the one- and four-component Fokker-Planck systems.

Grid: nx^d periodic x-points (FFT order, x_j = j L / nx) times ns cell-centred
s-points on [0, s_max] with zero flux at both ends. The default flux is the
exponentially fitted (Scharfetter-Gummel) one, for which a sampled Gaussian
centred on Phi0 carries exactly zero flux; first-order upwind is available.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import lapack, null_space
from scipy.optimize import brentq

from ._columns import explicit_fluxes, implicit_columns
from .connectivity import Potential, omega_grid
from .errors import CFLError, ConfigError, NegativityError, NFError
from .homogeneous import ModelParams, solve_rho_bar_inf

NEG_TOL = 1e-12
HEX_WAVEVECTORS = [(3, 3), (4, 1), (1, 4)]


def bernoulli(x):
    """B(x) = x / (exp(x) - 1), with B(0) = 1."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-6
    safe = np.where(small, 1.0, x)
    return np.where(small, 1.0 - 0.5 * x + x * x / 12.0, safe / np.expm1(safe))


def bernoulli_prime(x):
    """B'(x) = B(x) (1 - B(x) - x) / x, with B'(0) = -1/2."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-3
    safe = np.where(small, 1.0, x)
    b = bernoulli(safe)
    return np.where(small, -0.5 + x / 6.0 - x**3 / 180.0, b * (1.0 - b - safe) / safe)


def s_cells(s_max: float, ns: int, grid: str = "uniform", s_fine: float | None = None, fine_fraction: float = 0.75):
    """Cell edges of the s-grid on [0, s_max].

    ``graded``: ``fine_fraction`` of the cells uniformly on [0, s_fine], the rest
    growing geometrically up to s_max.
    """
    if grid == "uniform" or s_fine is None or s_fine >= s_max:
        return np.linspace(0.0, s_max, ns + 1)
    n_f = max(4, min(ns - 1, int(round(fine_fraction * ns))))
    n_t = ns - n_f
    h = s_fine / n_f
    rest = s_max - s_fine
    if n_t * h >= rest:
        return np.linspace(0.0, s_max, ns + 1)

    def span(r):
        return h * sum(r**i for i in range(1, n_t + 1)) - rest

    r = brentq(span, 1.0, 10.0, xtol=1e-15)
    tail = s_fine + np.cumsum(h * r ** np.arange(1, n_t + 1))
    tail[-1] = s_max
    return np.concatenate([np.linspace(0.0, s_fine, n_f + 1), tail])


@dataclass
class SimConfig:
    params: ModelParams
    potential: Potential
    kappa: float
    nx: int = 64
    ns: int = 256
    s_max: float | None = None
    dt: float | str = "auto"
    t_end: float = 0.0
    init: dict = field(default_factory=lambda: {"kind": "point", "amplitude": 1e-13})
    components: int = 1
    shifts: list | None = None
    scheme: str = "explicit"
    flux: str = "sg"
    s_grid: str = "uniform"
    cfl: float = 0.9
    record_every: float | None = None

    def __post_init__(self):
        p = self.params
        if not self.kappa > 0:
            raise ConfigError("kappa must be positive")
        if p.d > 2:
            raise ConfigError("the simulator supports d <= 2")
        if self.potential.d != p.d or not math.isclose(self.potential.L, p.L):
            raise ConfigError("potential and model disagree on L or d")
        if self.nx < 4 or self.nx % 2:
            raise ConfigError("nx must be even and >= 4")
        if self.ns < 8:
            raise ConfigError("ns must be >= 8")
        s_min = float(p.phi(p.B)) + 6.0 / math.sqrt(self.kappa)
        if self.s_max is None:
            self.s_max = float(p.phi(p.B)) + 10.0 / math.sqrt(self.kappa)
        elif self.s_max < s_min:
            raise ConfigError(f"s_max={self.s_max} is below Phi(B) + 6/sqrt(kappa) = {s_min:.6g}")
        if self.components not in (1, 4):
            raise ConfigError("components must be 1 or 4")
        if self.components == 4:
            sh = np.zeros((4, p.d)) if self.shifts is None else np.asarray(self.shifts, dtype=float)
            if sh.shape != (4, p.d):
                raise ConfigError("shifts must be four vectors of length d")
            self.shifts = sh.tolist()
        if self.scheme not in ("explicit", "implicit"):
            raise ConfigError("scheme must be explicit or implicit")
        if self.flux not in ("sg", "upwind"):
            raise ConfigError("flux must be sg or upwind")
        if self.s_grid not in ("uniform", "graded"):
            raise ConfigError("s_grid must be uniform or graded")
        if self.t_end < 0:
            raise ConfigError("t_end must be >= 0")
        if not (self.dt == "auto" or (isinstance(self.dt, (int, float)) and self.dt > 0)):
            raise ConfigError("dt must be positive or 'auto'")
        kind = self.init.get("kind")
        if kind not in ("point", "mode", "homogeneous"):
            raise ConfigError(f"unknown init kind {kind!r}")


@dataclass
class FieldState:
    """rho[c, m, j] = base[j] + dev[c, m, j]: component c, flattened x-point m,
    s-cell j of width ds[j]. ``base`` is the discrete homogeneous steady column;
    keeping the deviation separately lets perturbations far below the
    resolution of rho itself evolve with full relative precision."""

    dev: np.ndarray
    base: np.ndarray
    t: float
    s: np.ndarray
    ds: np.ndarray
    nx: int
    d: int

    @property
    def rho(self) -> np.ndarray:
        return self.base + self.dev

    def _grid(self, values):
        return values.reshape((self.dev.shape[0],) + (self.nx,) * self.d)

    @property
    def rho_bar_dev(self) -> np.ndarray:
        """rho_bar minus its steady value."""
        return self._grid(self.dev @ (self.s * self.ds))

    @property
    def rho_bar(self) -> np.ndarray:
        return self.rho_bar_dev + float(self.base @ (self.s * self.ds))

    @property
    def mass(self) -> np.ndarray:
        return (self.dev @ self.ds) + float(self.base @ self.ds)

    def copy(self) -> "FieldState":
        return FieldState(self.dev.copy(), self.base, self.t, self.s, self.ds, self.nx, self.d)


class Simulator:
    def __init__(self, cfg: SimConfig):
        self.cfg = cfg
        p = cfg.params
        self.p = p
        self.sigma = 1.0 / cfg.kappa
        self.W0 = cfg.potential.mean(cfg.nx)
        s_fine = None
        if cfg.s_grid == "graded":
            # resolve the Gaussian bulk around the homogeneous centre
            P = solve_rho_bar_inf(ModelParams(p.L, p.d, p.B, self.W0, p.phi, p.tau), cfg.kappa).phi0
            s_fine = P + 8.0 / math.sqrt(cfg.kappa)
        self.edges = s_cells(cfg.s_max, cfg.ns, cfg.s_grid, s_fine)
        self.ds = np.diff(self.edges)
        self.s = 0.5 * (self.edges[1:] + self.edges[:-1])
        self.delta = np.diff(self.s)
        self.s_mid = 0.5 * (self.s[1:] + self.s[:-1])
        self.shape_x = (cfg.nx,) * p.d
        self.dA = (p.L / cfg.nx) ** p.d
        self.w_hat = cfg.potential.fft(cfg.nx)
        self.phase = None
        if cfg.components == 4:
            freqs = [np.fft.fftfreq(cfg.nx, 1.0 / cfg.nx)] * (p.d - 1) + [np.fft.rfftfreq(cfg.nx, 1.0 / cfg.nx)]
            K = np.meshgrid(*freqs, indexing="ij")
            self.phase = np.stack(
                [np.exp(-2j * np.pi * sum(k * r for k, r in zip(K, rb)) / p.L) for rb in np.asarray(cfg.shifts)]
            )
        # reference column, its input and face fluxes
        self.P0 = self.steady_phi0()
        self.base = self.gaussian(self.P0)
        self.w = self.s * self.ds
        self.u_inf = float(self.w_hat.flat[0].real) * self.dA * float(self.base @ self.w) + p.B
        self.phi_inf = float(p.phi(self.u_inf))
        self.dP_ref = self.phi_inf - self.P0
        alpha, beta = self._face_coeffs(np.array(self.P0))
        self.j_inf = alpha * self.base[:-1] - beta * self.base[1:]

    # steady state
    def gaussian(self, P: float) -> np.ndarray:
        """Gaussian profile centred at P sampled at the cell centres with mass 1/L^d."""
        logw = -0.5 * self.cfg.kappa * (self.s - P) ** 2
        w = np.exp(logw - logw.max())
        return w / ((w @ self.ds) * self.p.Ld)

    def discrete_mean(self, P: float) -> float:
        return float(self.gaussian(P) @ (self.s * self.ds))

    def steady_phi0(self) -> float:
        """Phi0 solving P = Phi(W0 * mean(P) + B) for the discrete profile."""
        p = self.p

        def F(P):
            return P - p.phi(self.W0 * self.discrete_mean(P) + p.B)

        hi = float(p.phi(p.B))
        if F(0.0) >= 0.0:
            return 0.0
        return brentq(F, 0.0, hi, xtol=1e-16, rtol=4 * np.finfo(float).eps, maxiter=400)

    def _state(self, dev, t=0.0) -> FieldState:
        return FieldState(dev, self.base, t, self.s, self.ds, self.cfg.nx, self.p.d)

    def steady_state(self) -> FieldState:
        m = int(np.prod(self.shape_x))
        return self._state(np.zeros((self.cfg.components, m, self.cfg.ns)))

    def _gaussian_shift(self, h: float) -> np.ndarray:
        """gaussian(P0 + h) - gaussian(P0); first order below 1e-6."""
        if abs(h) >= 1e-6:
            return self.gaussian(self.P0 + h) - self.base
        x = self.s - self.P0
        mean = (self.base * x) @ self.ds * self.p.Ld
        return h * self.cfg.kappa * self.base * (x - mean)

    def initial_state(self) -> FieldState:
        st = self.steady_state()
        init = self.cfg.init
        kind = init.get("kind")
        amp = float(init.get("amplitude", 1e-13))
        if kind == "point":
            # (base + amp) renormalised to mass 1/L^d, minus base
            site = tuple(init.get("site", (0,) * self.p.d))
            idx = int(np.ravel_multi_index(site, self.shape_x))
            S = self.ds.sum() * self.p.Ld
            st.dev[:, idx] = amp * (1.0 - self.base * S) / (1.0 + amp * S)
        elif kind == "mode":
            om = omega_grid(init["k"], self.cfg.nx, self.p.L).ravel()
            for m, w in enumerate(om):
                st.dev[:, m] = self._gaussian_shift(amp * w)
        return st

    # dynamics
    def _axes(self):
        return tuple(range(1, self.p.d + 1))

    def _input_hat(self, field_hat: np.ndarray) -> np.ndarray:
        """Fourier transform of the shared input generated by per-component mean fields."""
        if self.phase is None:
            return self.w_hat * field_hat[0] * self.dA
        return self.w_hat * np.mean(self.phase * field_hat, axis=0) * self.dA

    def input_field(self, rho_bar: np.ndarray) -> np.ndarray:
        """W * rho_bar + B on the x-grid, shape (nx,)*d."""
        m_hat = self._input_hat(np.fft.rfftn(rho_bar, axes=self._axes()))
        return np.fft.irfftn(m_hat, s=self.shape_x, axes=tuple(range(self.p.d))) + self.p.B

    def _drive_increment(self, state: FieldState):
        """(du, dP) on the x-grid: input and drive minus their steady values."""
        bar = state.rho_bar_dev
        du_hat = self._input_hat(np.fft.rfftn(bar, axes=self._axes()))
        du = np.fft.irfftn(du_hat, s=self.shape_x, axes=tuple(range(self.p.d))).ravel()
        phi = self.p.phi
        dP = phi(self.u_inf + du) - self.phi_inf
        small = np.abs(du) < 1e-5
        if small.any():
            try:
                taylor = du * (phi.d1(self.u_inf) + 0.5 * du * phi.d2(self.u_inf))
                dP = np.where(small, taylor, dP)
            except NFError:
                pass
        return du, dP + self.dP_ref

    def drive(self, state: FieldState) -> np.ndarray:
        """Phi(input + B) per component and x-point, shape (C, M)."""
        _, dP = self._drive_increment(state)
        return np.broadcast_to(self.P0 + dP, (state.dev.shape[0], dP.size))

    def _face_coeffs(self, P: np.ndarray, deriv: bool = False):
        """(alpha, beta) with interior face flux J = alpha rho_j - beta rho_{j+1};
        with ``deriv`` also their derivatives in P."""
        k = self.sigma / self.delta
        if self.cfg.flux == "sg":
            pe = (P[..., None] - self.s_mid) * (self.delta / self.sigma)
            coeffs = (k * bernoulli(-pe), k * bernoulli(pe))
            if deriv:
                return coeffs + (-bernoulli_prime(-pe), bernoulli_prime(pe))
            return coeffs
        a = P[..., None] - self.edges[1:-1]
        coeffs = (np.maximum(a, 0.0) + k, -np.minimum(a, 0.0) + k)
        if deriv:
            return coeffs + ((a > 0).astype(float), -(a < 0).astype(float))
        return coeffs

    def stable_dt(self, P: np.ndarray) -> float:
        """Largest explicit step keeping every diagonal coefficient nonnegative."""
        alpha, beta = self._face_coeffs(P)
        out = np.zeros(P.shape + (self.cfg.ns,))
        out[..., :-1] += alpha
        out[..., 1:] += beta
        return self.p.tau / float((out / self.ds).max())

    def auto_dt(self) -> float:
        p = self.p
        h = float(self.ds.min())
        amax = max(float(p.phi(p.B)), self.cfg.s_max)
        bound = self.cfg.cfl * p.tau / (amax / h + 2.0 * self.sigma / h**2)
        if self.cfg.scheme == "implicit":
            # backward Euler in s with a linearised implicit input
            return max(bound, 0.5 * p.tau)
        return bound

    def _divergence(self, J: np.ndarray) -> np.ndarray:
        div = np.zeros(J.shape[:-1] + (self.cfg.ns,))
        div[..., :-1] += J
        div[..., 1:] -= J
        return div / self.ds

    def step(self, state: FieldState, dt: float) -> FieldState:
        if self.cfg.scheme == "explicit":
            _, dP = self._drive_increment(state)
            P = self.P0 + dP
            bound = self.stable_dt(P)
            if dt > bound * (1 + 1e-12):
                raise CFLError(f"dt={dt:.4g} ms exceeds the positivity bound {bound:.4g} ms")
            C, M, ns = state.dev.shape
            dev = np.ascontiguousarray(state.dev.reshape(C * M, ns))
            F = np.empty((C * M, ns - 1))
            explicit_fluxes(
                dev, self.base, np.ascontiguousarray(np.tile(dP, C)), self.P0, self.j_inf,
                self.s_mid, self.edges[1:-1], self.delta, self.sigma, self.cfg.flux == "sg", F,
            )
            new = state.dev - (dt / self.p.tau) * self._divergence(F.reshape(C, M, ns - 1))
        else:
            new = self._implicit_step(state, dt)
        rho = self.base + new
        lo = float(rho.min())
        if lo < -NEG_TOL * float(np.abs(rho).max()):
            where = np.unravel_index(int(np.argmin(rho)), rho.shape)
            raise NegativityError(f"density {lo:.3g} at (component, x, s-cell)={where}, t={state.t + dt:.6g} ms")
        return self._state(new, state.t + dt)

    def _implicit_step(self, state: FieldState, dt: float) -> np.ndarray:
        """Backward Euler in s with the input linearised about the current state.

        rho' = y - z dP, with (I + c A(P)) [y, z] = [rho, c dA/dP rho]; the input
        increment dP = Phi'(u) W * (rho_bar' - rho_bar) is solved per Fourier mode
        using the x-average of Phi' times the s-mean of z. The update is applied
        as one telescoping flux difference on the deviation, so mass is exact.
        """
        dev = state.dev
        C, M, ns = dev.shape
        du, dP = self._drive_increment(state)
        dphi = np.asarray(self.p.phi.d1(self.u_inf + du))
        rows = np.ascontiguousarray(dev.reshape(C * M, ns))
        eta = np.empty_like(rows)
        z = np.empty_like(rows)
        fy = np.empty((C * M, ns - 1))
        gz = np.empty_like(fy)
        c = dt / self.p.tau
        implicit_columns(
            rows, self.base, np.ascontiguousarray(np.tile(dP, C)), self.P0, self.j_inf, self.s_mid,
            self.edges[1:-1], self.delta, self.ds, self.sigma, c, self.cfg.flux == "sg", eta, z, fy, gz,
        )
        eta = eta.reshape(dev.shape)
        z = z.reshape(dev.shape)
        r = (eta - dev) @ self.w
        gamma = (dphi * (z @ self.w)).mean(axis=-1)
        shape = (C,) + self.shape_x
        r_hat = np.fft.rfftn(r.reshape(shape), axes=self._axes())
        g_hat = gamma.reshape((C,) + (1,) * self.p.d).astype(complex)
        du_hat = self._input_hat(r_hat) / (1.0 + self._input_hat(g_hat * np.ones_like(r_hat)))
        du_x = np.fft.irfftn(du_hat, s=self.shape_x, axes=tuple(range(self.p.d))).ravel()
        dPn = (dphi * du_x)[None, :, None]
        F = fy.reshape(C, M, ns - 1) + dPn * gz.reshape(C, M, ns - 1)
        return dev - c * self._divergence(F)

    # diagnostics
    def _jacobian_parts(self):
        P0 = self.P0
        prof = self.base
        alpha, beta, dalpha, dbeta = self._face_coeffs(np.array(P0), deriv=True)
        A = self._operator(P0)
        b = self._divergence(dalpha * prof[:-1] - dbeta * prof[1:])
        u0 = self.W0 * self.discrete_mean(P0) + self.p.B
        return A, b, float(self.p.phi.d1(u0))

    def linear_growth_rates(self, modes) -> dict:
        """Leading growth rate (1/ms) of the linearised semi-discrete system per Fourier index."""
        A, b, dphi = self._jacobian_parts()
        w_full = np.fft.fftn(self.cfg.potential.grid(self.cfg.nx)) * self.dA
        # perturbations carry zero mass, an invariant subspace of the operator
        Q = null_space(self.ds[None, :])
        out = {}
        for k in modes:
            mu = float(w_full[tuple(k)].real)
            J = -A - dphi * mu * np.outer(b, self.s * self.ds)
            out[tuple(k)] = float(np.max(np.linalg.eigvals(Q.T @ J @ Q).real)) / self.p.tau
        return out

    def _operator(self, P: float) -> np.ndarray:
        """Matrix of the s-divergence: d rho/dt = -(A rho)/tau for fixed input P."""
        alpha, beta = self._face_coeffs(np.array(P))
        ns = self.cfg.ns
        A = np.zeros((ns, ns))
        i = np.arange(ns - 1)
        A[i, i] += alpha
        A[i, i + 1] -= beta
        A[i + 1, i + 1] += beta
        A[i + 1, i] -= alpha
        return A / self.ds[:, None]


_SIMS: dict = {}


def _sim(cfg: SimConfig) -> Simulator:
    key = id(cfg)
    sim = _SIMS.get(key)
    if sim is None or sim.cfg is not cfg:
        _SIMS.clear()
        sim = _SIMS[key] = Simulator(cfg)
    return sim


def discrete_steady_state(cfg: SimConfig) -> FieldState:
    return _sim(cfg).steady_state()


def step(state: FieldState, cfg: SimConfig, dt: float | None = None) -> FieldState:
    sim = _sim(cfg)
    if dt is None:
        dt = sim.auto_dt() if cfg.dt == "auto" else float(cfg.dt)
    return sim.step(state, dt)


# observables


def spectrum(field2d: np.ndarray) -> np.ndarray:
    """|FFT|^2 of the zero-mean field."""
    f = field2d - field2d.mean()
    return np.abs(np.fft.fftn(f)) ** 2


def dominant_mode(field2d: np.ndarray) -> tuple:
    """(|k_x|, |k_y|) of the largest nonzero-frequency power, ties broken by smallest index."""
    pw = spectrum(field2d)
    n = field2d.shape[0]
    freqs = np.abs(np.fft.fftfreq(n, 1.0 / n)).astype(int)
    flat = pw.ravel()
    best = int(np.argmax(flat))
    idx = np.unravel_index(best, pw.shape)
    k = tuple(int(freqs[i]) for i in idx)
    return k + (0,) * (2 - len(k))


def hexagonality(field2d: np.ndarray) -> float:
    """Share of non-DC spectral energy at the wavevectors (+-3,+-3), (+-4,+-1), (+-1,+-4)."""
    if field2d.ndim != 2:
        return math.nan
    pw = spectrum(field2d)
    total = pw.sum()
    if total <= 0:
        return 0.0
    n = field2d.shape[0]
    hexe = 0.0
    seen = set()
    for kx, ky in HEX_WAVEVECTORS:
        for sx in (1, -1):
            for sy in (1, -1):
                key = ((sx * kx) % n, (sy * ky) % n)
                if key not in seen:
                    seen.add(key)
                    hexe += pw[key]
    return float(hexe / total)


def deviation_l2(field: np.ndarray, dA: float) -> float:
    return float(math.sqrt(np.sum((field - field.mean()) ** 2) * dA))


@dataclass
class RunResult:
    snapshots: dict
    timeseries: list
    final: FieldState
    dt: float


def run(cfg: SimConfig, snapshot_times=(), state: FieldState | None = None, progress=None) -> RunResult:
    """Integrate to cfg.t_end, saving rho_bar at ``snapshot_times`` (ms).

    The timeseries has rows (t, deviation_l2, dominant_kx, dominant_ky, hexagonality)
    of the component-averaged mean field, sampled every ``record_every`` ms
    (default: every step) and at every snapshot time.
    """
    sim = _sim(cfg)
    state = sim.initial_state() if state is None else state
    dt = sim.auto_dt() if cfg.dt == "auto" else float(cfg.dt)
    marks = sorted({float(t) for t in snapshot_times if 0 <= t <= cfg.t_end} | {cfg.t_end})
    snaps = {}
    series = []

    def record(st):
        f = st.rho_bar_dev.mean(axis=0)
        if cfg.params.d == 2:
            kx, ky = dominant_mode(f)
            hx = hexagonality(f)
        else:
            kx, ky, hx = dominant_mode(f)[0], 0, math.nan
        series.append((st.t, deviation_l2(f, sim.dA), kx, ky, hx))

    record(state)
    next_rec = state.t + (cfg.record_every or 0.0)
    if 0.0 in {float(t) for t in snapshot_times}:
        snaps[0.0] = state.rho_bar.mean(axis=0)
    t_eps = 1e-9 * max(dt, 1.0)
    for mark in marks:
        while state.t < mark - t_eps:
            h = min(dt, mark - state.t)
            state = sim.step(state, h)
            if cfg.record_every is None or state.t >= next_rec - t_eps:
                record(state)
                next_rec = state.t + (cfg.record_every or 0.0)
            if progress is not None:
                progress(state)
        if mark in {float(t) for t in snapshot_times}:
            if series[-1][0] != state.t:
                record(state)
            snaps[mark] = state.rho_bar.mean(axis=0)
    return RunResult(snaps, series, state, dt)


def first_saturation(series, factor: float = 1e6, drop: float = 0.1):
    """Index of the first sample where growth has stalled after amplification.

    The reference rate is the log-growth rate when the deviation first reaches
    ``factor`` x its running minimum; saturation is the first later sample whose
    rate falls below ``drop`` times that reference. None if never.
    """
    t = np.array([r[0] for r in series])
    dev = np.array([r[1] for r in series])
    if len(t) < 3 or np.any(dev <= 0):
        return None
    rate = np.gradient(np.log(dev), t)
    dmin = np.minimum.accumulate(dev)
    grown = np.nonzero(dev >= factor * dmin)[0]
    if grown.size == 0 or rate[grown[0]] <= 0:
        return None
    ref = rate[grown[0]]
    later = grown[rate[grown] < drop * ref]
    return int(later[0]) if later.size else None


# writers


def write_snapshot_csv(path, grid: np.ndarray) -> None:
    np.savetxt(path, np.atleast_2d(grid), delimiter=",", fmt="%.17g")


def write_timeseries_csv(path, series) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "deviation_l2", "dominant_kx", "dominant_ky", "hexagonality"])
        for t, dev, kx, ky, hx in series:
            w.writerow([repr(float(t)), repr(float(dev)), kx, ky, repr(float(hx))])


def snapshot_name(t: float) -> str:
    return f"rhoBar_t{t:g}.csv"


def write_run(out_dir, result: RunResult, cfg: SimConfig, echo: dict | None = None) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for t, grid in sorted(result.snapshots.items()):
        name = snapshot_name(t)
        write_snapshot_csv(out / name, grid)
        files.append({"t": t, "file": name})
    write_timeseries_csv(out / "timeseries.csv", result.timeseries)
    manifest = {
        "config": echo or {},
        "dt": result.dt,
        "s_max": cfg.s_max,
        "ns": cfg.ns,
        "nx": cfg.nx,
        "snapshots": files,
        "timeseries": "timeseries.csv",
        "final_t": result.final.t,
        "hexagonality": "share of non-DC spectral energy of rho_bar at wavevectors (+-3,+-3), (+-4,+-1), (+-1,+-4)",
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return manifest
