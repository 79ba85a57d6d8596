"""Periodic connectivity potentials on the torus [0, L)^d and their cosine modes.

Grids are stored in FFT order: index j on an axis is the point x = j*L/n,
closed forms are evaluated at the minimum-image coordinate in [-L/2, L/2).
The cosine basis is omega_k = Theta(k) L^{-d/2} prod_i cos(2 pi k_i x_i / L).
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .errors import AliasingError, ConfigError

POTENTIAL_KINDS = ("tanh_ring", "difference_of_gaussians", "ball_indicator", "grid_table", "cosine_sum")

# 2^14: the prefactor printed with the figure potentials, taken literally
FIGURE_SCALE = 2.0**14

DEFAULT_N = 256
OVERSAMPLE = 4


def axis_coords(n: int, L: float) -> np.ndarray:
    """Minimum-image coordinates of the n FFT-ordered grid points on one axis."""
    x = np.arange(n) * (L / n)
    return np.where(x >= L / 2, x - L, x)


def _mesh(n: int, L: float, d: int, offsets: Sequence[float] = (0.0,)):
    x = axis_coords(n, L)
    return [np.add.outer(x, np.asarray(offsets)) for _ in range(d)]


@dataclass(frozen=True)
class Potential:
    """Connectivity potential W. ``params`` depend on ``kind``:

    tanh_ring: amplitude, offset, steepness, aniso (per-axis weights) with
        W = amplitude * (1 + tanh(offset - steepness * sqrt(sum aniso_i x_i^2)))
    difference_of_gaussians: amplitude, rate1, rate2 with
        W = amplitude * (exp(-rate1 |x|^2) - exp(-rate2 |x|^2))
    ball_indicator: amplitude, radius (cell-averaged with 4x oversampling)
    cosine_sum: constant, terms = [{"k": [...], "coeff": c}, ...] with
        W = constant + sum c * prod cos(2 pi k_i x_i / L)
    grid_table: path to a CSV (header "N,L,d", then a value row, then N^d samples)
        or inline ``values`` (nested list in FFT order).
    """

    kind: str
    params: dict[str, Any] = field(default_factory=dict)
    L: float = 1.0
    d: int = 2
    n: int = DEFAULT_N
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in POTENTIAL_KINDS:
            raise ConfigError(f"unknown potential kind {self.kind!r}")
        if not self.L > 0:
            raise ConfigError("L must be positive")
        if int(self.d) != self.d or self.d < 1:
            raise ConfigError("d must be an integer >= 1")
        if self.kind == "grid_table":
            table = self._load_table()
            object.__setattr__(self, "n", table.shape[0])
            object.__setattr__(self, "d", table.ndim)
            self._cache[table.shape[0]] = table
        if self.n < 4 or self.n % 2:
            raise ConfigError("grid size n must be even and >= 4")

    # sampling
    def _load_table(self) -> np.ndarray:
        p = self.params
        if "values" in p:
            arr = np.asarray(p["values"], dtype=float)
            if arr.ndim < 1 or len(set(arr.shape)) != 1:
                raise ConfigError("grid_table values must be an N^d array")
            return arr
        path = p.get("path")
        if path is None:
            raise ConfigError("grid_table needs 'path' or 'values'")
        return load_grid_csv(path, self.L)

    def _evaluate(self, coords: list[np.ndarray]) -> np.ndarray:
        p = self.params
        amp = float(p.get("amplitude", 1.0))
        if self.kind == "tanh_ring":
            aniso = np.broadcast_to(np.asarray(p.get("aniso", 1.0), dtype=float), (self.d,))
            r = np.sqrt(sum(a * c**2 for a, c in zip(aniso, coords)))
            return amp * (1.0 + np.tanh(float(p.get("offset", 10.0)) - float(p.get("steepness", 50.0)) * r))
        r2 = sum(c**2 for c in coords)
        if self.kind == "difference_of_gaussians":
            return amp * (np.exp(-float(p.get("rate1", 21.0)) * r2) - np.exp(-float(p.get("rate2", 20.0)) * r2))
        if self.kind == "ball_indicator":
            return amp * (r2 < float(p.get("radius", 0.2)) ** 2).astype(float)
        # cosine_sum
        out = np.full(np.broadcast(*coords).shape, float(p.get("constant", 0.0)))
        for term in p.get("terms", []):
            k = list(term["k"])
            if len(k) != self.d:
                raise ConfigError(f"cosine_sum term {k} does not have {self.d} components")
            prod = float(term["coeff"])
            for ki, c in zip(k, coords):
                prod = prod * np.cos(2 * np.pi * ki * c / self.L)
            out = out + prod
        return out

    def grid(self, n: int | None = None) -> np.ndarray:
        """Samples of W on the n^d FFT-ordered grid (cached, read-only)."""
        n = self.n if n is None else int(n)
        if n in self._cache:
            return self._cache[n]
        if self.kind == "grid_table":
            raise ConfigError(f"grid_table potential is only available at N={self.n}, not {n}")
        if self.kind == "ball_indicator":
            h = self.L / n
            offs = ((np.arange(OVERSAMPLE) + 0.5) / OVERSAMPLE - 0.5) * h
            axes = [np.add.outer(axis_coords(n, self.L), offs) for _ in range(self.d)]
            # broadcast axis i to dims (2i, 2i+1), then average the sub-cell dims
            shaped = []
            for i, a in enumerate(axes):
                shape = [1] * (2 * self.d)
                shape[2 * i], shape[2 * i + 1] = n, OVERSAMPLE
                shaped.append(a.reshape(shape))
            vals = self._evaluate(shaped)
            w = vals.mean(axis=tuple(range(1, 2 * self.d, 2)))
        else:
            x = axis_coords(n, self.L)
            coords = np.meshgrid(*([x] * self.d), indexing="ij")
            w = self._evaluate(coords)
        w = np.ascontiguousarray(w, dtype=float)
        w.setflags(write=False)
        self._cache[n] = w
        return w

    def fft(self, n: int | None = None) -> np.ndarray:
        n = self.n if n is None else int(n)
        key = ("fft", n)
        if key not in self._cache:
            self._cache[key] = np.fft.rfftn(self.grid(n))
        return self._cache[key]

    def cell_volume(self, n: int | None = None) -> float:
        n = self.n if n is None else int(n)
        return (self.L / n) ** self.d

    def mean(self, n: int | None = None) -> float:
        """W0 = integral of W over the torus (periodic trapezoid)."""
        return float(self.grid(n).sum() * self.cell_volume(n))

    def convolve(self, values: np.ndarray) -> np.ndarray:
        """Circular convolution (W * values)(x) = int W(x - y) values(y) dy on the values' grid."""
        n = values.shape[0]
        axes = tuple(range(values.ndim))
        return np.fft.irfftn(self.fft(n) * np.fft.rfftn(values), s=values.shape, axes=axes) * self.cell_volume(n)

    def negated(self) -> "Potential":
        return _ScaledPotential.wrap(self, -1.0)

    def is_even(self, tol: float = 1e-12) -> bool:
        w = self.grid()
        scale = max(1.0, float(np.max(np.abs(w))))
        for ax in range(self.d):
            flipped = np.roll(np.flip(w, axis=ax), 1, axis=ax)
            if np.max(np.abs(flipped - w)) > tol * scale:
                return False
        return True

    def is_exchangeable(self, tol: float = 1e-10) -> bool:
        w = self.grid()
        scale = max(1.0, float(np.max(np.abs(w))))
        for perm in itertools.permutations(range(self.d)):
            if np.max(np.abs(np.transpose(w, perm) - w)) > tol * scale:
                return False
        return True

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": dict(self.params), "L": self.L, "d": self.d, "n": self.n}


class _ScaledPotential(Potential):
    """A potential multiplied by a constant (used for -W)."""

    @classmethod
    def wrap(cls, base: Potential, factor: float) -> "Potential":
        new = cls.__new__(cls)
        for name in ("kind", "params", "L", "d", "n"):
            object.__setattr__(new, name, getattr(base, name))
        object.__setattr__(new, "_cache", {})
        object.__setattr__(new, "_base", base)
        object.__setattr__(new, "_factor", factor)
        return new

    def grid(self, n=None):
        n = self.n if n is None else int(n)
        if n not in self._cache:
            w = np.ascontiguousarray(self._factor * self._base.grid(n))
            w.setflags(write=False)
            self._cache[n] = w
        return self._cache[n]


def load_grid_csv(path: str | Path, L: float | None = None) -> np.ndarray:
    """Read a grid_table CSV: header ``N,L,d``, one value row, then N^d samples row-major."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"potential table {path} does not exist")
    with path.open(newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if len(rows) < 2 or [c.strip() for c in rows[0]] != ["N", "L", "d"]:
        raise ConfigError(f"{path}: first line must be the header 'N,L,d'")
    try:
        n, file_L, d = int(rows[1][0]), float(rows[1][1]), int(rows[1][2])
        vals = np.array([float(c) for r in rows[2:] for c in r if c.strip()])
    except (ValueError, IndexError) as exc:
        raise ConfigError(f"{path}: malformed table ({exc})") from None
    if L is not None and not math.isclose(file_L, L):
        raise ConfigError(f"{path}: table L={file_L} differs from configured L={L}")
    if vals.size != n**d:
        raise ConfigError(f"{path}: expected {n**d} samples, found {vals.size}")
    return vals.reshape((n,) * d)


def write_grid_csv(path: str | Path, values: np.ndarray, L: float) -> None:
    values = np.asarray(values)
    n, d = values.shape[0], values.ndim
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["N", "L", "d"])
        w.writerow([n, repr(float(L)), d])
        for row in values.reshape(-1, n):
            w.writerow([repr(float(v)) for v in row])


def paper_tanh_ring(a: float = 1.0, n: int = DEFAULT_N) -> Potential:
    """-0.005 * 2^14 * (1 + tanh(10 - 50 sqrt(a x^2 + y^2))) on the unit 2-torus."""
    params = {"amplitude": -0.005 * FIGURE_SCALE, "offset": 10.0, "steepness": 50.0, "aniso": [a, 1.0]}
    return Potential("tanh_ring", params, L=1.0, d=2, n=n)


# modes


def theta(k: Sequence[int]) -> float:
    """Theta(k) = prod sqrt(2 - delta_{k_i, 0})."""
    return math.prod(math.sqrt(2.0) if ki else 1.0 for ki in k)


def _check_k(k, d: int, n: int | None = None):
    k = tuple(int(v) for v in k)
    if len(k) != d:
        raise ConfigError(f"mode {k} must have {d} components")
    if any(v < 0 for v in k):
        raise ConfigError(f"mode {k} must have nonnegative components")
    if n is not None and max(k) >= n // 2:
        raise AliasingError(f"mode {k} is not resolved on a grid with {n} points per axis (need max k < {n // 2})")
    return k


def omega_grid(k: Sequence[int], n: int, L: float, kind: str = "cos") -> np.ndarray:
    """Sample omega_k (or its all-sine analogue) on the n^d FFT-ordered grid."""
    d = len(k)
    k = _check_k(k, d, n)
    x = np.arange(n) * (L / n)
    trig = np.cos if kind == "cos" else np.sin
    out = np.array(theta(k) / L ** (d / 2))
    for ki in k:
        out = np.multiply.outer(out, trig(2 * np.pi * ki * x / L))
    return out


def fourier_modes(W: Potential, k_max: int, n: int | None = None) -> np.ndarray:
    """Table of W~(k) for all k in {0..k_max}^d, indexed as table[k_1, ..., k_d]."""
    n = W.n if n is None else n
    if k_max >= n // 2:
        raise AliasingError(f"k_max={k_max} is not resolved on a grid with {n} points per axis")
    x = np.arange(n) * (W.L / n)
    C = np.cos(2 * np.pi * np.outer(np.arange(k_max + 1), x) / W.L)
    t = W.grid(n)
    for _ in range(W.d):
        # contract the leading grid axis, append the mode axis at the end
        t = np.tensordot(t, C, axes=([0], [1]))
    ks = np.arange(k_max + 1)
    th = np.where(ks > 0, math.sqrt(2.0), 1.0)
    thetas = th
    for _ in range(W.d - 1):
        thetas = np.multiply.outer(thetas, th)
    return t * thetas * W.cell_volume(n) / W.L ** (W.d / 2)


def fourier_mode(W: Potential, k: Sequence[int], n: int | None = None) -> float:
    """W~(k) = <W, omega_k> by the periodic trapezoid rule."""
    n = W.n if n is None else n
    k = _check_k(k, W.d, n)
    return float(np.sum(W.grid(n) * omega_grid(k, n, W.L)) * W.cell_volume(n))


def four_comp_factor(k: Sequence[int], shifts, L: float) -> float:
    """(1/4) sum_beta prod_i cos(2 pi k_i r_i^beta / L)."""
    shifts = np.asarray(shifts, dtype=float)
    if shifts.ndim != 2 or shifts.shape[0] != 4 or shifts.shape[1] != len(k):
        raise ConfigError("shifts must be four vectors with one entry per dimension")
    k = np.asarray(k, dtype=float)
    return float(np.mean(np.prod(_cos_turns(k * shifts / L), axis=1)))


def _cos_turns(x):
    """cos(2 pi x), exact at multiples of a quarter turn."""
    x = np.mod(x, 1.0)
    out = np.cos(2 * np.pi * x)
    q = 4 * x
    exact = q == np.round(q)
    out[exact] = np.array([1.0, 0.0, -1.0, 0.0])[np.round(q[exact]).astype(int) % 4]
    return out


def norm_omega_sq(members: Sequence[Sequence[int]] | Sequence[int], L: float) -> float:
    """||omega^2||_2^2 = int omega^4 for omega_k or the class vector omega_[k]."""
    members = np.atleast_2d(np.asarray(members, dtype=int))
    d = members.shape[1]
    kmax = int(members.max())
    n = max(8, 4 * kmax + 4)
    n += n % 2
    om = sum(omega_grid(m, n, L) for m in members) / math.sqrt(len(members))
    return float(np.sum(om**4) * (L / n) ** d)


@dataclass(frozen=True)
class ModeClass:
    representative: tuple
    members: tuple
    theta: float
    w_tilde: float
    card: int
    four_comp_factor: float = 1.0
    class_id: int = 0

    @property
    def ratio(self) -> float:
        return self.w_tilde / self.theta

    @property
    def effective_ratio(self) -> float:
        return self.ratio * self.four_comp_factor

    @property
    def label(self) -> str:
        return "[" + ",".join("(" + ",".join(map(str, m)) + ")" for m in self.members) + "]"


def mode_table(
    W: Potential,
    k_max: int,
    exchangeable: str = "auto",
    shifts=None,
    n: int | None = None,
) -> list[ModeClass]:
    """Mode classes with components <= k_max, sorted by descending effective ratio.

    ``exchangeable``: "auto" runs the permutation test on W, "on"/"off" force it.
    Members are merged only when their W~ and four-component factors agree.
    """
    if k_max < 0:
        raise ConfigError("k_max must be >= 0")
    if exchangeable not in ("auto", "on", "off"):
        raise ConfigError("exchangeable must be auto, on or off")
    merge = W.is_exchangeable() if exchangeable == "auto" else exchangeable == "on"
    table = fourier_modes(W, k_max, n)
    scale = max(1.0, float(np.max(np.abs(table))))

    def factor(k):
        return 1.0 if shifts is None else four_comp_factor(k, shifts, W.L)

    classes = []
    seen = set()
    for k in itertools.product(range(k_max + 1), repeat=W.d):
        if k in seen:
            continue
        if merge:
            perms = sorted(set(itertools.permutations(k)))
            wt = [table[p] for p in perms]
            fs = [factor(p) for p in perms]
            if max(wt) - min(wt) <= 1e-10 * scale and max(fs) - min(fs) <= 1e-12:
                seen.update(perms)
                rep = tuple(sorted(k))
                classes.append((rep, tuple(perms), float(table[rep]), fs[0]))
                continue
        seen.add(k)
        classes.append((k, (k,), float(table[k]), factor(k)))

    classes.sort(key=lambda c: (-(c[2] / theta(c[0])) * c[3], c[0]))
    return [
        ModeClass(rep, members, theta(rep), wt, len(members), fac, i)
        for i, (rep, members, wt, fac) in enumerate(classes)
    ]


def h_stability_check(W: Potential, k_max: int, tol: float | None = None):
    """(is_h_stable, offending) where offending lists (k, W~(k)) with W~(k) < -tol."""
    table = fourier_modes(W, k_max)
    if tol is None:
        tol = 1e-10 * max(1.0, float(np.max(np.abs(W.grid())))) * W.L ** (W.d / 2)
    bad = [(tuple(int(i) for i in k), float(table[k])) for k in zip(*np.nonzero(table < -tol))]
    return not bad, bad


def write_mode_csv(path: str | Path, classes: Sequence[ModeClass]) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "theta", "w_tilde", "ratio", "class_id", "four_comp_factor"])
        for c in classes:
            for m in c.members:
                w.writerow([" ".join(map(str, m)), repr(c.theta), repr(c.w_tilde), repr(c.ratio), c.class_id, repr(c.four_comp_factor)])
