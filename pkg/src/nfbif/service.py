"""HTTP service over the command layer.

Config errors map to 422, numerical failures to 500; both carry
{"error": kind, "detail": message} so clients can map them to exit codes.
"""

from __future__ import annotations

from typing import Any, Literal

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from . import __version__, reports
from .config import RunConfig
from .errors import ConfigError, NumericalError

app = FastAPI(title="nfbif", version=__version__)


class Job(BaseModel):
    config: RunConfig = Field(default_factory=RunConfig)


class HomogeneousRequest(Job):
    kappa: list[float] = Field(default_factory=list, description="kappa values to tabulate")


class PatternRequest(Job):
    preset: str = "hex"
    k: list[int] | None = None
    grid_n: int = Field(256, ge=4)
    modes: list[list[Any]] | None = Field(None, description="explicit [k, weight] or [k, weight, 'sin'] entries")


class OracleRequest(Job):
    kappa: float = Field(gt=0)
    k: list[int]
    order: Literal[1, 2, 3] = 1
    eps: float | None = Field(None, gt=0)


@app.exception_handler(ConfigError)
async def _config_error(request: Request, exc: ConfigError):
    return JSONResponse(status_code=422, content={"error": "config", "detail": str(exc)})


@app.exception_handler(NumericalError)
async def _numerical_error(request: Request, exc: NumericalError):
    return JSONResponse(status_code=500, content={"error": "numerical", "detail": f"{type(exc).__name__}: {exc}"})


@app.get("/health")
def health():
    return {"status": "ok", "version": __version__}


@app.get("/schema")
def config_schema():
    return RunConfig.model_json_schema()


@app.post("/homogeneous")
def homogeneous(req: HomogeneousRequest):
    return reports.cmd_homogeneous(req.config, req.kappa)


@app.post("/modes")
def modes(req: Job):
    return reports.cmd_modes(req.config)


@app.post("/diagram")
def diagram(req: Job):
    return reports.cmd_diagram(req.config)


@app.post("/bifurcations")
def bifurcations(req: Job):
    return reports.cmd_bifurcations(req.config)


@app.post("/pattern")
def pattern(req: PatternRequest):
    return reports.cmd_pattern(req.config, req.preset, req.k, req.grid_n, req.modes)


@app.post("/simulate")
def simulate(req: Job):
    return reports.cmd_simulate(req.config)


@app.post("/oracle")
def oracle(req: OracleRequest):
    return reports.cmd_oracle(req.config, req.kappa, req.k, req.order, req.eps)


def serve(argv=None) -> None:
    """Run the service with uvicorn: nfbif-serve [--host H] [--port P]."""
    import argparse

    import uvicorn

    p = argparse.ArgumentParser(prog="nfbif-serve")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    args = p.parse_args(argv)
    uvicorn.run(app, host=args.host, port=args.port)
