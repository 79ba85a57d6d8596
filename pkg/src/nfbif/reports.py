"""Commands tying the modules together; each returns a JSON-ready payload.

File writing is kept separate (write_* helpers) so the same payload can be
produced by the service and written by a client.
"""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import bifurcation as bif
from . import connectivity as conn
from . import field_sim as fs
from .config import RunConfig, build_params, build_potential, build_sim_config
from .errors import NoCrossingError
from .homogeneous import asymptotic_limits, kappa_c, solve_rho_bar_inf
from .oracle import frechet_fd_oracle


def _num(x):
    """float for JSON; nan/inf become None."""
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def _setup(cfg: RunConfig):
    W = build_potential(cfg)
    return W, build_params(cfg, W)


def kappa_grid(kmin: float, kmax: float, points: int, log: bool = True) -> list[float]:
    if points <= 0:
        return []
    if points == 1:
        return [float(kmin)]
    g = np.geomspace(kmin, kmax, points) if log else np.linspace(kmin, kmax, points)
    return [float(k) for k in g]


def cmd_homogeneous(cfg: RunConfig, kappas) -> dict:
    _, params = _setup(cfg)
    rows = []
    for k in kappas:
        s = solve_rho_bar_inf(params, float(k))
        rows.append((float(k), s.rho_bar_inf, s.phi0, s.rho_inf_at_zero, s.d_rho_bar_d_kappa))
    header = ["kappa", "rho_bar_inf", "phi0", "rho_inf_at_zero", "d_rho_bar_d_kappa"]
    return {"csv": _csv(header, rows), "kappa_c": kappa_c(params)}


def cmd_modes(cfg: RunConfig) -> dict:
    W, _ = _setup(cfg)
    a = cfg.analysis
    classes = conn.mode_table(W, a.k_max, exchangeable=a.exchangeable, shifts=a.shifts)
    rows = [
        (" ".join(map(str, m)), c.theta, c.w_tilde, c.ratio, c.class_id, c.four_comp_factor)
        for c in classes
        for m in c.members
    ]
    header = ["k", "theta", "w_tilde", "ratio", "class_id", "four_comp_factor"]
    return {"csv": _csv(header, rows), "minus_w_h_stable": bool(conn.h_stability_check(W.negated(), a.k_max)[0])}


def _column_name(mc: conn.ModeClass) -> str:
    return "ratio_" + "_".join(map(str, mc.representative))


def cmd_diagram(cfg: RunConfig) -> dict:
    """psi(kappa) samples plus one constant column per mode class (effective ratio)."""
    W, params = _setup(cfg)
    a = cfg.analysis
    classes = conn.mode_table(W, a.k_max, exchangeable=a.exchangeable, shifts=a.shifts)
    kc = kappa_c(params)
    kappas, values = bif.scan_grid(params, cfg.diagram.kappa_max, cfg.diagram.points)
    header = ["kappa", "psi"] + [_column_name(mc) for mc in classes]
    ratios = [mc.effective_ratio for mc in classes]
    rows = [(float(k), float(v), *ratios) for k, v in zip(kappas, values)]
    try:
        lin = bif.linear_stability_threshold(
            W, params, a.k_max, a.kappa_max, exchangeable=a.exchangeable, shifts=a.shifts
        )
    except NoCrossingError:
        lin = None
    points, _ = bif.find_crossings(W, params, a.k_max, a.kappa_max, classes=classes)
    markers = {
        "kappa_c": kc,
        "linear_stability": _num(lin),
        "psi_limit": bif.psi_limit(params),
        "psi_cap": _num(bif.psi_cap(params)),
        "crossings": [{"class": [list(m) for m in p.mode.members], "kappa_star": p.kappa_star} for p in points],
    }
    return {"csv": _csv(header, rows), "markers": markers}


def _crossing_entry(p: bif.BifurcationPoint) -> dict:
    mc = p.mode
    out = {
        "k": list(mc.representative),
        "class": [list(m) for m in mc.members],
        "ratio": mc.ratio,
        "four_comp_factor": mc.four_comp_factor,
        "kappa_star": p.kappa_star,
        "residual": p.residual,
        "kernel_dim": p.kernel_dim,
        "flags": dict(p.validation),
    }
    c = p.coeffs
    if c is not None:
        out.update(
            {
                "C1": c.c1,
                "C2": c.c2,
                "A3": c.a3,
                "K1": c.k1,
                "K2": c.k2,
                "K3": c.k3,
                "kappa_pp0": c.kappa_pp0,
                "label": c.label,
                "K1_intermediate": c.k1_intermediate,
                "kappa_pp0_intermediate": c.kappa_pp0_intermediate,
                "K1_exact": c.k1_exact,
                "K2_exact": c.k2_exact,
                "K1_fd": _num(c.k1_fd),
                "kappa_pp0_fd": _num(c.kappa_pp0_fd),
                "discrepancy": _num(c.discrepancy),
                "kappa_pp0_full": _num(c.kappa_pp0_full),
                "label_full": c.label_full,
                "warning": c.warning,
            }
        )
    return {k: (_num(v) if isinstance(v, (float, np.floating)) else v) for k, v in out.items()}


def cmd_bifurcations(cfg: RunConfig) -> dict:
    W, params = _setup(cfg)
    a = cfg.analysis
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", bif.BranchDiscrepancyWarning)
        points, rejections, _ = bif.analyse(
            W,
            params,
            a.k_max,
            a.kappa_max,
            exchangeable=a.exchangeable,
            shifts=a.shifts,
            check_fd=a.check_fd,
            max_points=a.max_points,
        )
    rho_star, phi_star = asymptotic_limits(params)
    return {
        "config": cfg.echo(),
        "generated": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "W0": params.W0,
        "kappa_c": kappa_c(params),
        "rho_star": rho_star,
        "phi_star": phi_star,
        "psi_limit": bif.psi_limit(params),
        "psi_cap": _num(bif.psi_cap(params)),
        "crossings": [_crossing_entry(p) for p in points],
        "rejections": [
            {"k": list(r.mode.representative), "class": [list(m) for m in r.mode.members],
             "ratio": r.mode.effective_ratio, "reason": r.reason}
            for r in rejections
        ],
    }


def cmd_pattern(cfg: RunConfig, preset: str, k=None, grid_n: int = 256, modes=None) -> dict:
    """Grid of a pattern preset (or explicit [(k, weight[, 'sin'])] modes)."""
    d, L = cfg.model.d, cfg.model.L
    if modes is not None:
        entries, normalized = [tuple(m) for m in modes], True
    elif preset == "zero":
        entries, normalized = [], True
    else:
        entries, normalized = bif.preset_modes(preset, k)
    grid = bif.pattern_field(entries, grid_n, L, normalized) if entries else np.zeros((grid_n,) * d)
    return {"n": grid_n, "L": L, "d": grid.ndim, "values": grid.tolist()}


def cmd_simulate(cfg: RunConfig, progress=None) -> dict:
    scfg = build_sim_config(cfg)
    res = fs.run(scfg, cfg.sim.snapshots, progress=progress)
    sat = fs.first_saturation(res.timeseries)
    return {
        "config": cfg.echo(),
        "dt": res.dt,
        "s_max": scfg.s_max,
        "final_t": res.final.t,
        "snapshots": {repr(float(t)): g.tolist() for t, g in sorted(res.snapshots.items())},
        "timeseries": [list(map(float, r[:2])) + [int(r[2]), int(r[3]), _num(r[4])] for r in res.timeseries],
        "first_saturation": None if sat is None else res.timeseries[sat][0],
    }


def cmd_oracle(cfg: RunConfig, kappa: float, k, order: int, eps: float | None = None) -> dict:
    """Finite-difference Frechet derivative next to its closed form."""
    W, params = _setup(cfg)
    k = tuple(int(c) for c in k)
    value = frechet_fd_oracle(W, params, kappa, k, order, eps=eps)
    s = solve_rho_bar_inf(params, kappa)
    ratio = conn.fourier_mode(W, k) / conn.theta(k)
    if order == 1:
        closed = bif.eigenvalue(params, s, ratio)
    elif order == 2:
        closed = 0.0
    else:
        c1 = params.L ** (params.d / 2) * ratio
        closed = -bif._q_derivatives(params, s)[2] * c1**3 * conn.norm_omega_sq(list(k), params.L)
    return {"kappa": kappa, "k": list(k), "order": order, "value": value, "closed_form": closed}


# writers


def write_text(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path


def write_json(path: Path, payload: dict) -> Path:
    return write_text(path, json.dumps(payload, indent=2, sort_keys=True, allow_nan=False) + "\n")


def write_pattern(path: Path, payload: dict) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    conn.write_grid_csv(path, np.asarray(payload["values"]), payload["L"])
    return path


def write_simulation(out_dir: Path, payload: dict) -> dict:
    out_dir.mkdir(parents=True, exist_ok=True)
    files = []
    for key, grid in payload["snapshots"].items():
        t = float(key)
        name = fs.snapshot_name(t)
        fs.write_snapshot_csv(out_dir / name, np.asarray(grid))
        files.append({"t": t, "file": name})
    fs.write_timeseries_csv(out_dir / "timeseries.csv", payload["timeseries"])
    manifest = {
        "config": payload["config"],
        "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "dt": payload["dt"],
        "s_max": payload["s_max"],
        "final_t": payload["final_t"],
        "first_saturation": payload["first_saturation"],
        "snapshots": files,
        "timeseries": "timeseries.csv",
        "hexagonality": "share of non-DC spectral energy of rho_bar at wavevectors (+-3,+-3), (+-4,+-1), (+-1,+-4)",
    }
    write_json(out_dir / "manifest.json", manifest)
    return manifest
