"""Command-line client of the nfbif service.

Runs the service in-process by default; ``--server URL`` sends the same
requests to a running instance. Exit codes: 0 success, 2 config error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_INTERNAL = 0, 2, 3, 1
_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "NUMBA_NUM_THREADS")


def _cap_threads() -> None:
    n = os.environ.get("NF_THREADS")
    if n:
        for var in _THREAD_VARS:
            os.environ[var] = n


def _json_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.replace(",", " ").split()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-c", "--config", help="JSON run config")
    common.add_argument(
        "--set", action="append", default=[], metavar="KEY=VALUE",
        help="override a config field by dotted path, e.g. analysis.k_max=8 (value parsed as JSON)",
    )
    common.add_argument("-o", "--output-dir", help="output directory (overrides output_dir)")
    common.add_argument("--server", help="URL of a running service; default runs in-process")

    p = argparse.ArgumentParser(prog="nfbif", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    h = sub.add_parser("homogeneous", parents=[common], help="tabulate the homogeneous state over kappa")
    h.add_argument("--kappa", type=float, nargs="*", help="explicit kappa values")
    h.add_argument("--kappa-min", type=float, default=0.1)
    h.add_argument("--kappa-max", type=float, default=200.0)
    h.add_argument("--points", type=int, default=200)
    h.add_argument("--linear", action="store_true", help="linear instead of log spacing")

    m = sub.add_parser("modes", parents=[common], help="Fourier mode table")
    m.add_argument("--k-max", type=int)
    m.add_argument("--exchangeable", choices=["auto", "on", "off"])

    d = sub.add_parser("diagram", parents=[common], help="threshold function and mode ratios")
    d.add_argument("--kappa-max", type=float)
    d.add_argument("--points", type=int)

    b = sub.add_parser("bifurcations", parents=[common], help="crossings, validation and branch coefficients")
    b.add_argument("--k-max", type=int)
    b.add_argument("--kappa-max", type=float)
    b.add_argument("--no-fd", action="store_true", help="skip the finite-difference K1 check")
    b.add_argument("--max-points", type=int)

    pt = sub.add_parser("pattern", parents=[common], help="pattern grids")
    pt.add_argument("--preset", default="hex",
                    help="mode_k, class_k, superpose_2nd_3rd, superpose_1st_3rd, superpose_1st_2nd, hex, zero")
    pt.add_argument("--k", type=_int_list, help="mode index, e.g. 0,4")
    pt.add_argument("--grid-n", type=int, default=256)

    s = sub.add_parser("simulate", parents=[common], help="time evolution")
    s.add_argument("--kappa", type=float)
    s.add_argument("--t-end", type=float)
    s.add_argument("--dt", type=float)
    s.add_argument("--nx", type=int)
    s.add_argument("--ns", type=int)

    o = sub.add_parser("oracle", parents=[common], help="finite-difference Frechet derivative")
    o.add_argument("--kappa", type=float, required=True)
    o.add_argument("--k", type=_int_list, required=True)
    o.add_argument("--order", type=int, choices=[1, 2, 3], default=1)
    o.add_argument("--eps", type=float)

    p.add_argument("--version", action="version", version="nfbif 0.1.0")
    return p


# flag -> dotted config path, per command
_FLAG_PATHS = {
    "modes": {"k_max": "analysis.k_max", "exchangeable": "analysis.exchangeable"},
    "diagram": {"kappa_max": "diagram.kappa_max", "points": "diagram.points"},
    "bifurcations": {"k_max": "analysis.k_max", "kappa_max": "analysis.kappa_max", "max_points": "analysis.max_points"},
    "simulate": {"kappa": "sim.kappa", "t_end": "sim.t_end", "dt": "sim.dt", "nx": "sim.nx", "ns": "sim.ns"},
}


def _overrides(args) -> dict:
    out = {}
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep:
            raise ValueError(f"--set expects KEY=VALUE, got {item!r}")
        out[key.strip()] = _json_value(value)
    for flag, path in _FLAG_PATHS.get(args.command, {}).items():
        value = getattr(args, flag, None)
        if value is not None:
            out[path] = value
    if args.command == "bifurcations" and args.no_fd:
        out["analysis.check_fd"] = False
    if args.output_dir:
        out["output_dir"] = args.output_dir
    return out


def _client(server: str | None):
    if server:
        import httpx

        return httpx.Client(base_url=server, timeout=None)
    import warnings

    # in-process transport; the notice concerns starlette's choice of http client
    warnings.filterwarnings("ignore", message="Using `httpx` with `starlette.testclient`")
    from fastapi.testclient import TestClient

    from .service import app

    return TestClient(app, raise_server_exceptions=False)


def _request(args, cfg) -> tuple[str, dict]:
    from . import reports

    body = {"config": cfg.echo()}
    if args.command == "homogeneous":
        kappas = args.kappa if args.kappa is not None else reports.kappa_grid(
            args.kappa_min, args.kappa_max, args.points, log=not args.linear
        )
        body["kappa"] = kappas
    elif args.command == "pattern":
        body.update({"preset": args.preset, "k": args.k, "grid_n": args.grid_n})
    elif args.command == "oracle":
        body.update({"kappa": args.kappa, "k": args.k, "order": args.order, "eps": args.eps})
    return "/" + args.command, body


def _write(args, cfg, payload) -> dict:
    from . import reports

    out = Path(cfg.output_dir)
    cmd = args.command
    if cmd in ("homogeneous", "modes"):
        return {"file": str(reports.write_text(out / f"{cmd}.csv", payload["csv"]))}
    if cmd == "diagram":
        return {
            "file": str(reports.write_text(out / "diagram.csv", payload["csv"])),
            "markers": str(reports.write_json(out / "diagram_markers.json", payload["markers"])),
        }
    if cmd == "bifurcations":
        return {"file": str(reports.write_json(out / "bifurcations.json", payload)), "crossings": len(payload["crossings"])}
    if cmd == "pattern":
        name = args.preset + ("_" + "_".join(map(str, args.k)) if args.k else "")
        return {"file": str(reports.write_pattern(out / f"pattern_{name}.csv", payload))}
    if cmd == "simulate":
        manifest = reports.write_simulation(out, payload)
        return {"dir": str(out), "snapshots": len(manifest["snapshots"]), "first_saturation": manifest["first_saturation"]}
    return payload


def main(argv=None) -> int:
    _cap_threads()
    args = build_parser().parse_args(argv)
    from .config import load_config
    from .errors import ConfigError

    try:
        cfg = load_config(args.config, _overrides(args))
    except (ConfigError, ValueError, OSError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    path, body = _request(args, cfg)
    with _client(args.server) as client:
        resp = client.post(path, json=body)
    try:
        payload = resp.json()
    except ValueError:
        payload = {"detail": resp.text}
    if resp.status_code == 422:
        print(f"config error: {payload.get('detail')}", file=sys.stderr)
        return EXIT_CONFIG
    if resp.status_code != 200:
        if payload.get("error") == "numerical":
            print(f"numerical failure: {payload.get('detail')}", file=sys.stderr)
            return EXIT_NUMERICAL
        print(f"internal error ({resp.status_code}): {payload.get('detail')}", file=sys.stderr)
        return EXIT_INTERNAL
    print(json.dumps(_write(args, cfg, payload), sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
