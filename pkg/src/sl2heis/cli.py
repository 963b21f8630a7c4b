"""Batch command-line front end.

Every subcommand is a thin client of the HTTP service: it builds one request,
posts it (in-process by default, or to --server when given), prints the JSON
report, and maps the outcome to an exit status: 0 on success, 1 when the run
completed but missed a requested tolerance, 2 on usage or input errors.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import sys

import httpx


def _floats(text: str):
    try:
        return [float(tok) for tok in text.split(",") if tok.strip() != ""]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers: {exc}")


def _parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(
        prog="sl2heis",
        description="Control-schedule synthesis and verification toolkit.",
    )
    sub = top.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", help="write the report (CSV for sweep, JSON otherwise) here")
        p.add_argument("--server", help="base URL of a running service; default runs in-process")

    p = sub.add_parser("check-algebra", help="structure constants, Jacobi, Ad closed forms")
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--seed", type=int, default=1234)
    p.add_argument("--samples", type=int, default=200)
    p.add_argument("--tol", type=float, default=1e-9)
    common(p)

    p = sub.add_parser("iwasawa", help="decompose a det-1 matrix into rotation/dilation/shear")
    p.add_argument("--matrix", required=True, type=_floats, help="4 entries, row-major")
    common(p)

    p = sub.add_parser("synth", help="plan a schedule for a group target")
    p.add_argument("--target", required=True, help="group element JSON, inline or a file path")
    p.add_argument("--tol", type=float, required=True)
    p.add_argument("--eps0", type=float, default=0.02)
    p.add_argument("--max-iter", type=int, default=20)
    common(p)

    p = sub.add_parser("simulate", help="exact endpoint of a schedule file")
    p.add_argument("--schedule", required=True, help="schedule JSON file")
    common(p)

    p = sub.add_parser("sweep", help="error-vs-epsilon convergence table")
    p.add_argument("--target", required=True, help="one of: c, 2a, rot, generic")
    p.add_argument("--eps", required=True, type=_floats, help="strictly decreasing list")
    p.add_argument("--jobs", type=int, default=1)
    common(p)

    p = sub.add_parser("quantum-reach", help="plan and verify a wavefunction target")
    p.add_argument("--d", type=int, default=1, choices=(1, 2))
    p.add_argument(
        "--params",
        required=True,
        type=_floats,
        help="s, alpha, p_1..p_d, sigma, beta_1..beta_d",
    )
    p.add_argument("--tol", type=float, required=True)
    p.add_argument("--grid-n", type=int, default=16384)
    p.add_argument("--grid-l", type=float, default=24.0)
    p.add_argument("--dt-max", type=float, default=1e-3)
    p.add_argument("--eta", type=float, default=5e-5)
    p.add_argument("--eps0", type=float, default=0.0125)
    common(p)

    p = sub.add_parser("liouville-reach", help="plan and verify a phase-space density target")
    p.add_argument("--d", type=int, default=1)
    p.add_argument(
        "--params",
        required=True,
        type=_floats,
        help="alpha, t, r, s_1..s_d, w_1..w_d",
    )
    p.add_argument("--tol", type=float, required=True)
    p.add_argument("--grid-n", type=int, default=512)
    p.add_argument("--grid-l", type=float, default=8.0, help="half-width of the phase box")
    p.add_argument("--p", type=_floats, default=[1.0, 2.0], help="Lp exponents")
    p.add_argument("--eps0", type=float, default=0.01)
    common(p)

    return top


def _read_target(spec: str) -> dict:
    text = spec
    if not spec.lstrip().startswith("{"):
        with open(spec, "r", encoding="utf-8") as fh:
            text = fh.read()
    return json.loads(text)


def _build_request(args) -> tuple:
    if args.command == "check-algebra":
        return "/check-algebra", {
            "d": args.d,
            "seed": args.seed,
            "samples": args.samples,
            "tol": args.tol,
        }
    if args.command == "iwasawa":
        return "/iwasawa", {"matrix": args.matrix}
    if args.command == "synth":
        return "/synth", {
            "target": _read_target(args.target),
            "tol": args.tol,
            "eps0": args.eps0,
            "max_iter": args.max_iter,
        }
    if args.command == "simulate":
        with open(args.schedule, "r", encoding="utf-8") as fh:
            schedule = json.load(fh)
        return "/simulate", {"schedule": schedule}
    if args.command == "sweep":
        return "/sweep", {"target": args.target, "eps": args.eps, "jobs": args.jobs}
    if args.command == "quantum-reach":
        d = args.d
        vals = args.params
        if len(vals) != 3 + 2 * d:
            raise ValueError(f"--params needs {3 + 2 * d} numbers for d={d}")
        return "/quantum-reach", {
            "d": d,
            "s": vals[0],
            "alpha": vals[1],
            "p": vals[2 : 2 + d],
            "sigma": vals[2 + d],
            "beta": vals[3 + d : 3 + 2 * d],
            "tol": args.tol,
            "grid_n": args.grid_n,
            "grid_l": args.grid_l,
            "dt_max": args.dt_max,
            "eta": args.eta,
            "eps0": args.eps0,
        }
    if args.command == "liouville-reach":
        d = args.d
        vals = args.params
        if len(vals) != 3 + 2 * d:
            raise ValueError(f"--params needs {3 + 2 * d} numbers for d={d}")
        return "/liouville-reach", {
            "d": d,
            "alpha": vals[0],
            "t": vals[1],
            "r": vals[2],
            "s": vals[3 : 3 + d],
            "w": vals[3 + d : 3 + 2 * d],
            "tol": args.tol,
            "grid_n": args.grid_n,
            "grid_l": args.grid_l,
            "p_norms": args.p,
            "eps0": args.eps0,
        }
    raise ValueError(f"unknown command {args.command!r}")


def _post(server: str, path: str, payload: dict) -> httpx.Response:
    if server:
        return httpx.post(server.rstrip("/") + path, json=payload, timeout=None)

    from .service import app  # imported lazily; --help must not pay for numpy

    async def go():
        transport = httpx.ASGITransport(app=app)
        async with httpx.AsyncClient(
            transport=transport, base_url="http://sl2heis.internal", timeout=None
        ) as client:
            return await client.post(path, json=payload)

    return asyncio.run(go())


def _write_sweep_csv(report: dict, path: str):
    from .simulate import SweepRow, write_sweep_csv

    rows = [
        SweepRow(
            epsilon=row["epsilon"],
            error=row["error"],
            total_time=row["total_time"],
            max_amplitude=row["max_amplitude"],
        )
        for row in report["rows"]
    ]
    write_sweep_csv(rows, path)


def main(argv=None) -> int:
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    try:
        path, payload = _build_request(args)
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    try:
        resp = _post(args.server, path, payload)
    except httpx.HTTPError as exc:
        print(f"error: service request failed: {exc}", file=sys.stderr)
        return 2

    if resp.status_code in (400, 422):
        print(f"error: invalid input: {resp.text}", file=sys.stderr)
        return 2
    if resp.status_code != 200:
        print(f"error: service returned {resp.status_code}: {resp.text}", file=sys.stderr)
        return 2

    report = resp.json()
    print(json.dumps(report, indent=2, sort_keys=True))
    if args.out:
        if args.command == "sweep":
            _write_sweep_csv(report, args.out)
        else:
            with open(args.out, "w", encoding="utf-8") as fh:
                json.dump(report, fh, indent=2, sort_keys=True)
                fh.write("\n")

    return 0 if report.get("ok", True) else 1


if __name__ == "__main__":
    sys.exit(main())
