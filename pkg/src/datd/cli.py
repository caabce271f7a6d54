"""Command-line client for the simulator service.

Subcommands:

* ``run``    simulate one scenario and write per_task/credibility/weights
             tables plus a manifest to the output directory.
* ``sweep``  vary one parameter over a value grid and write sweep tables.
* ``table2`` print the worked-example verification beside the pinned
             values; exits 0 only if every check passes.
* ``serve``  launch the HTTP service.

The client talks to the service layer for all computation: by default it
executes the service in-process, and ``--server URL`` points it at a
running instance instead, with identical behavior. Outputs are written
client-side: each table is a comma-separated ``.csv`` (header row, ``.``
decimal point, LF line endings, floats as shortest round-trip decimals)
with a whitespace-separated ``.dat`` twin for plotting tools, and every
run directory gets a ``manifest.json`` that records the resolved
configuration, scheme selection, output directory, tool version, and
wall-clock duration.

Exit codes: 0 success, 1 I/O or service-connection failure, 2 invalid
flags or configuration. ``DATD_OUT_DIR`` supplies the default for
``--out``.
"""

from __future__ import annotations

import argparse
import asyncio
import csv
import json
import os
import sys
import time

import httpx

from . import __version__
from .config import load_config_file
from .harness import (
    CREDIBILITY_COLUMNS,
    PER_TASK_COLUMNS,
    SWEEP_COLUMNS,
    WEIGHT_COLUMNS,
)
from .schemas import ScenarioModel

_TIMEOUT = 600.0

_FLAG_TO_FIELD = (
    ("seed", "seed"),
    ("tasks", "n_tasks"),
    ("alpha", "alpha"),
    ("beta", "beta"),
    ("gamma", "gamma"),
    ("omega", "omega"),
    ("tau", "tau"),
)


class UsageError(Exception):
    """Invalid flags or configuration; maps to exit code 2."""


class ServiceFailure(Exception):
    """The service could not complete the request; maps to exit code 1."""


def _request(server, method, path, payload=None):
    if server:
        url = server.rstrip("/") + path
        return httpx.request(method, url, json=payload, timeout=_TIMEOUT)

    from .service import app

    async def _go():
        transport = httpx.ASGITransport(app=app)
        async with httpx.AsyncClient(
            transport=transport, base_url="http://service.internal", timeout=_TIMEOUT
        ) as client:
            return await client.request(method, path, json=payload)

    return asyncio.run(_go())


def _check_response(response) -> dict:
    if response.status_code >= 500:
        raise ServiceFailure(
            f"service error {response.status_code}: {response.text.strip()}"
        )
    if response.status_code >= 400:
        try:
            body = response.json()
        except ValueError:
            raise UsageError(response.text.strip()) from None
        if "error" in body:
            raise UsageError(f"{body['error']}: {body.get('detail', '')}")
        raise UsageError(json.dumps(body.get("detail", body)))
    return response.json()


def _resolve_overrides(args) -> dict:
    overrides: dict = {}
    if args.config:
        overrides.update(load_config_file(args.config))
    for flag, field in _FLAG_TO_FIELD:
        value = getattr(args, flag, None)
        if value is not None:
            overrides[field] = value
    if "seed" not in overrides:
        raise UsageError(
            "a seed is required: pass --seed or set seed in the config file"
        )
    return overrides


def _resolve_out(args) -> str:
    out_dir = args.out or os.environ.get("DATD_OUT_DIR") or "."
    os.makedirs(out_dir, exist_ok=True)
    return out_dir


def _csv_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _dat_cell(value) -> str:
    if value is None:
        return "nan"
    return _csv_cell(value)


def _write_table(out_dir: str, stem: str, columns, rows) -> None:
    csv_path = os.path.join(out_dir, stem + ".csv")
    with open(csv_path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({name: _csv_cell(row.get(name)) for name in columns})
    dat_path = os.path.join(out_dir, stem + ".dat")
    with open(dat_path, "w", encoding="utf-8", newline="") as handle:
        handle.write("# " + " ".join(columns) + "\n")
        for row in rows:
            handle.write(" ".join(_dat_cell(row.get(name)) for name in columns) + "\n")


def _write_manifest(
    out_dir: str, *, command: str, config: dict, scheme: str, duration: float, extra=None
) -> None:
    manifest = {
        "tool": "datd",
        "version": __version__,
        "command": command,
        "scheme": scheme,
        "out_dir": os.path.abspath(out_dir),
        "duration_seconds": duration,
        "config": config,
    }
    if extra:
        manifest.update(extra)
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w", encoding="utf-8", newline="") as handle:
        json.dump(manifest, handle, indent=2)
        handle.write("\n")


def cmd_run(args) -> int:
    overrides = _resolve_overrides(args)
    out_dir = _resolve_out(args)
    start = time.perf_counter()
    response = _request(
        args.server, "POST", "/run", {"config": overrides, "scheme": args.scheme}
    )
    body = _check_response(response)
    _write_table(out_dir, "per_task", PER_TASK_COLUMNS, body["per_task"])
    _write_table(out_dir, "credibility", CREDIBILITY_COLUMNS, body["credibility"])
    _write_table(out_dir, "weights", WEIGHT_COLUMNS, body["weights"])
    duration = time.perf_counter() - start
    _write_manifest(
        out_dir,
        command="run",
        config=body["config"],
        scheme=body["scheme"],
        duration=duration,
    )
    for summary in body["summaries"]:
        print(
            f"{summary['scheme']}: total_deviation={summary['total_deviation']:.6f}"
            f" rmse={summary['rmse']:.6f} total_loss={summary['total_loss']:.6f}"
        )
    print(f"wrote per_task, credibility, weights tables and manifest.json to {out_dir}")
    return 0


def cmd_sweep(args) -> int:
    overrides = _resolve_overrides(args)
    resolved = ScenarioModel(**overrides).model_dump()
    out_dir = _resolve_out(args)
    start = time.perf_counter()
    response = _request(
        args.server,
        "POST",
        "/sweep",
        {
            "config": overrides,
            "param": args.param,
            "values": args.values,
            "seeds": args.seeds,
        },
    )
    body = _check_response(response)
    _write_table(out_dir, "sweep", SWEEP_COLUMNS, body["rows"])
    duration = time.perf_counter() - start
    _write_manifest(
        out_dir,
        command="sweep",
        config=resolved,
        scheme="both",
        duration=duration,
        extra={
            "sweep": {
                "param": args.param,
                "values": args.values,
                "seeds": args.seeds,
            }
        },
    )
    print(f"wrote {len(body['rows'])} sweep rows and manifest.json to {out_dir}")
    return 0


def cmd_table2(args) -> int:
    response = _request(args.server, "GET", "/table2")
    body = _check_response(response)
    checks = body["checks"]
    name_width = max(len(check["name"]) for check in checks)
    print(f"{'check'.ljust(name_width)}  {'expected':>10}  {'actual':>10}  result")
    for check in checks:
        status = "pass" if check["passed"] else "FAIL"
        print(
            f"{check['name'].ljust(name_width)}"
            f"  {check['expected']:>10.4f}  {check['actual']:>10.4f}  {status}"
        )
    passed = sum(1 for check in checks if check["passed"])
    print(f"{passed}/{len(checks)} checks passed (tolerance ±0.001)")
    return 0 if body["all_passed"] else 1


def cmd_serve(args) -> int:
    import uvicorn

    uvicorn.run("datd.service:app", host=args.host, port=args.port)
    return 0


def _values_argument(text: str):
    items = [part.strip() for part in text.split(",")]
    items = [part for part in items if part]
    if not items:
        raise argparse.ArgumentTypeError(
            "expected a non-empty comma-separated list of numbers"
        )
    try:
        return [float(part) for part in items]
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"could not parse {text!r} as comma-separated numbers"
        ) from None


def _add_server_flag(parser) -> None:
    parser.add_argument(
        "--server",
        metavar="URL",
        default=None,
        help="base URL of a running service; default runs the service in-process",
    )


def _add_config_flags(parser) -> None:
    parser.add_argument(
        "--config",
        metavar="PATH",
        help="flat 'key = value' config file; flags override file values",
    )
    parser.add_argument("--seed", type=int, metavar="N", help="scenario RNG seed")
    parser.add_argument(
        "--tasks", type=int, metavar="N", help="number of tasks (n_tasks)"
    )
    parser.add_argument(
        "--alpha", type=float, metavar="F", help="malicious fraction of sources"
    )
    parser.add_argument(
        "--beta", type=float, metavar="F", help="malicious fraction of nodes"
    )
    parser.add_argument(
        "--gamma", type=float, metavar="F", help="credibility discount factor"
    )
    parser.add_argument("--omega", type=float, metavar="F", help="tamper range")
    parser.add_argument(
        "--tau", type=float, metavar="F", help="high-value task probability"
    )


def _add_out_flag(parser) -> None:
    parser.add_argument(
        "--out",
        metavar="DIR",
        help="output directory (default: $DATD_OUT_DIR, else current directory)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="datd",
        description="Value-aware truth discovery simulator for price feeds.",
    )
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {__version__}"
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    run_parser = subparsers.add_parser(
        "run", help="simulate one scenario and write per-task tables"
    )
    _add_config_flags(run_parser)
    run_parser.add_argument(
        "--scheme",
        choices=("datd", "baseline", "both"),
        default="both",
        help="weighting scheme(s) to simulate",
    )
    _add_out_flag(run_parser)
    _add_server_flag(run_parser)
    run_parser.set_defaults(handler=cmd_run)

    sweep_parser = subparsers.add_parser(
        "sweep", help="vary one parameter over a value grid"
    )
    _add_config_flags(sweep_parser)
    sweep_parser.add_argument(
        "--param",
        choices=("beta", "omega", "gamma", "tau"),
        required=True,
        help="parameter to sweep",
    )
    sweep_parser.add_argument(
        "--values",
        type=_values_argument,
        required=True,
        metavar="V1,V2,...",
        help="comma-separated parameter values",
    )
    sweep_parser.add_argument(
        "--seeds", type=int, default=20, metavar="N", help="seeds per value"
    )
    _add_out_flag(sweep_parser)
    _add_server_flag(sweep_parser)
    sweep_parser.set_defaults(handler=cmd_sweep)

    table2_parser = subparsers.add_parser(
        "table2", help="verify the worked example against its pinned values"
    )
    _add_server_flag(table2_parser)
    table2_parser.set_defaults(handler=cmd_table2)

    serve_parser = subparsers.add_parser("serve", help="launch the HTTP service")
    serve_parser.add_argument("--host", default="127.0.0.1")
    serve_parser.add_argument("--port", type=int, default=8000)
    serve_parser.set_defaults(handler=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except httpx.HTTPError as exc:
        print(f"error: service request failed: {exc}", file=sys.stderr)
        return 1
    except ServiceFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
