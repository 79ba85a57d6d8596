"""Run configuration: one JSON document validated with pydantic.

Units: kappa = 1/sigma (dimensionless inverse noise), times in ms, activities
in the units of Phi, lengths in torus units (side L).
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from . import connectivity as conn
from .errors import ConfigError
from .field_sim import SimConfig
from .homogeneous import GainFunction, ModelParams


class _Spec(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ModelSpec(_Spec):
    L: float = Field(1.0, gt=0, description="torus side length")
    d: int = Field(2, ge=1, le=3, description="spatial dimension")
    B: float = Field(3.0, gt=0, description="constant external input (activity units)")
    tau: float = Field(10.0, gt=0, description="time constant (ms)")


class GainSpec(_Spec):
    kind: Literal["relu", "smooth_tanh", "user_table"] = "smooth_tanh"
    params: dict[str, Any] = Field(
        default_factory=dict,
        description="relu: slope; smooth_tanh: gain, eps; user_table: x, phi sample lists",
    )


class PotentialSpec(_Spec):
    kind: Literal["tanh_ring", "difference_of_gaussians", "ball_indicator", "grid_table", "cosine_sum"] = "tanh_ring"
    params: dict[str, Any] = Field(
        default_factory=lambda: {
            "amplitude": -0.005 * conn.FIGURE_SCALE,
            "offset": 10.0,
            "steepness": 50.0,
            "aniso": [1.0, 1.0],
        },
        description="closed-form parameters; grid_table takes path (CSV grid) or values",
    )
    n: int = Field(conn.DEFAULT_N, ge=4, description="grid points per axis used for modes and crossings")


class AnalysisSpec(_Spec):
    k_max: int = Field(6, ge=0, description="largest mode component")
    kappa_max: float = Field(1e4, gt=0, description="upper end of the crossing search")
    exchangeable: Literal["auto", "on", "off"] = "auto"
    shifts: list[list[float]] | None = Field(None, description="four-component shift vectors (4 x d)")
    check_fd: bool = Field(True, description="cross-check K1 with the finite-difference oracle")
    max_points: int | None = Field(None, ge=0, description="branch coefficients for the first crossings only")


class DiagramSpec(_Spec):
    kappa_max: float = Field(200.0, gt=0)
    points: int = Field(400, ge=2)


class SimSpec(_Spec):
    kappa: float = Field(55.0, gt=0)
    nx: int = Field(64, ge=4)
    ns: int = Field(192, ge=8)
    s_max: float | None = Field(None, description="s truncation (activity units); default Phi(B) + 10/sqrt(kappa)")
    dt: float | Literal["auto"] = Field("auto", description="time step (ms)")
    t_end: float = Field(2400.0, ge=0, description="end time (ms)")
    init: dict[str, Any] = Field(default_factory=lambda: {"kind": "point", "amplitude": 1e-13})
    components: Literal[1, 4] = 1
    shifts: list[list[float]] | None = None
    scheme: Literal["explicit", "implicit"] = "implicit"
    flux: Literal["sg", "upwind"] = "sg"
    s_grid: Literal["uniform", "graded"] = "graded"
    snapshots: list[float] = Field(default_factory=lambda: [40.0, 220.0, 1500.0, 1810.0, 2190.0, 2400.0])
    record_every: float | None = Field(None, gt=0, description="timeseries sampling interval (ms)")


class RunConfig(_Spec):
    model: ModelSpec = Field(default_factory=ModelSpec)
    gain: GainSpec = Field(default_factory=GainSpec)
    potential: PotentialSpec = Field(default_factory=PotentialSpec)
    analysis: AnalysisSpec = Field(default_factory=AnalysisSpec)
    diagram: DiagramSpec = Field(default_factory=DiagramSpec)
    sim: SimSpec | None = None
    output_dir: str = "out"

    @model_validator(mode="after")
    def _files_exist(self):
        path = self.potential.params.get("path") if self.potential.kind == "grid_table" else None
        if path is not None and not Path(path).is_file():
            raise ValueError(f"potential.params.path: file {path!r} does not exist")
        return self

    def echo(self) -> dict:
        return self.model_dump(mode="json")


def schema() -> dict:
    return RunConfig.model_json_schema()


SCHEMA_PATH = Path(__file__).with_name("run_config.schema.json")


def _format_errors(err: ValidationError) -> str:
    return "; ".join(f"{'.'.join(str(p) for p in e['loc']) or '<root>'}: {e['msg']}" for e in err.errors())


def parse_config(data: dict | None) -> RunConfig:
    try:
        return RunConfig.model_validate(data or {})
    except ValidationError as err:
        raise ConfigError(_format_errors(err)) from None


def set_path(data: dict, dotted: str, value) -> None:
    """Set data['a']['b'] = value for dotted='a.b', creating levels as needed."""
    keys = dotted.split(".")
    node = data
    for key in keys[:-1]:
        node = node.setdefault(key, {})
        if not isinstance(node, dict):
            raise ConfigError(f"cannot override {dotted}: {key} is not an object")
    node[keys[-1]] = value


def load_config(path: str | Path | None = None, overrides: dict | None = None) -> RunConfig:
    """Read a JSON config (if given) and apply dotted-path overrides."""
    data: dict = {}
    if path is not None:
        text = Path(path).read_text()
        try:
            data = json.loads(text)
        except json.JSONDecodeError as err:
            raise ConfigError(f"{path}: line {err.lineno} column {err.colno}: {err.msg}") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be an object")
    for key, value in (overrides or {}).items():
        set_path(data, key, value)
    return parse_config(data)


# builders


def build_gain(cfg: RunConfig) -> GainFunction:
    return GainFunction(cfg.gain.kind, dict(cfg.gain.params))


def build_potential(cfg: RunConfig) -> conn.Potential:
    return conn.Potential(cfg.potential.kind, dict(cfg.potential.params), L=cfg.model.L, d=cfg.model.d, n=cfg.potential.n)


def build_params(cfg: RunConfig, W: conn.Potential | None = None, n: int | None = None) -> ModelParams:
    W = W or build_potential(cfg)
    return ModelParams(
        L=cfg.model.L, d=cfg.model.d, B=cfg.model.B, W0=W.mean(n), phi=build_gain(cfg), tau=cfg.model.tau
    )


def build_sim_config(cfg: RunConfig) -> SimConfig:
    if cfg.sim is None:
        raise ConfigError("sim: section required for simulate")
    s = cfg.sim
    W = build_potential(cfg)
    params = build_params(cfg, W, s.nx)
    return SimConfig(
        params=params,
        potential=W,
        kappa=s.kappa,
        nx=s.nx,
        ns=s.ns,
        s_max=s.s_max,
        dt=s.dt,
        t_end=s.t_end,
        init=dict(s.init),
        components=s.components,
        shifts=s.shifts,
        scheme=s.scheme,
        flux=s.flux,
        s_grid=s.s_grid,
        record_every=s.record_every,
    )
