"""Command-line client for the verification service.

The CLI is a thin HTTP client.  By default it mounts the service app
in-process (no socket); pass --server to talk to a running instance.

    qecheck verify FILE
    qecheck check FILE --mode qe|soliton|static|rank [--tol T] [--json OUT]
    qecheck potential FILE --path "(a,b,c) -> (d,e,f)"
    qecheck harnack FILE --m 1e2,1e3,1e4 --trials N
    qecheck serve [--host H] [--port P]

Exit codes: 0 pass / decision yes, 1 decision no, 2 not generic,
3 input error.  QECHECK_THREADS controls point-level parallelism.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import sys
from pathlib import Path

import httpx

EXIT_INPUT = 3


def _post(server, endpoint, payload):
    if server:
        resp = httpx.post(server.rstrip("/") + endpoint, json=payload,
                          timeout=600.0)
        return resp.status_code, resp.json()

    from .service.app import app

    async def go():
        transport = httpx.ASGITransport(app=app)
        async with httpx.AsyncClient(
            transport=transport, base_url="http://qecheck", timeout=600.0
        ) as client:
            resp = await client.post(endpoint, json=payload)
            return resp.status_code, resp.json()

    return asyncio.run(go())


def _tol_payload(args):
    overrides = {}
    if getattr(args, "tol", None) is not None:
        overrides["decision"] = args.tol
    if getattr(args, "identity_tol", None) is not None:
        overrides["identity"] = args.identity_tol
    if getattr(args, "genericity_eps", None) is not None:
        overrides["genericity"] = args.genericity_eps
    return overrides or None


def _finish(status, body, args):
    if status != 200:
        detail = body.get("detail", body) if isinstance(body, dict) else body
        print(f"error: {detail}", file=sys.stderr)
        return EXIT_INPUT
    if getattr(args, "json_out", None):
        Path(args.json_out).write_text(json.dumps(body, indent=2) + "\n")
    summary = body.get("summary", {})
    worst = summary.get("worst") or {}
    print(f"mode:     {body.get('mode')}")
    print(f"decision: {summary.get('decision')}")
    if worst.get("name") is not None:
        print(f"worst:    {worst.get('name')} = {worst.get('value'):.6g} "
              f"at {worst.get('point')}")
    for key in ("residual_mode", "b2_ratio_small_over_large",
                "b2_loglog_slope", "sample_count", "not_generic_count"):
        if summary.get(key) is not None:
            print(f"{key}: {summary[key]}")
    if not getattr(args, "json_out", None):
        print("(use --json FILE for the full report)")
    return int(summary.get("exit_code", EXIT_INPUT))


def _read_manifold(args):
    path = Path(args.file)
    if not path.exists():
        print(f"error: no such file {path}", file=sys.stderr)
        sys.exit(EXIT_INPUT)
    return path.read_text()


def cmd_verify(args):
    payload = {"manifold": _read_manifold(args)}
    if (tol := _tol_payload(args)) is not None:
        payload["tolerances"] = tol
    return _finish(*_post(args.server, "/verify", payload), args)


def cmd_check(args):
    payload = {"manifold": _read_manifold(args), "mode": args.mode}
    if (tol := _tol_payload(args)) is not None:
        payload["tolerances"] = tol
    return _finish(*_post(args.server, "/check", payload), args)


def cmd_potential(args):
    payload = {
        "manifold": _read_manifold(args),
        "path": args.path,
        "subdivisions": args.subdivisions,
    }
    return _finish(*_post(args.server, "/potential", payload), args)


def cmd_harnack(args):
    try:
        m_values = [float(x) for x in args.m.split(",")]
    except ValueError:
        print(f"error: bad --m list {args.m!r}", file=sys.stderr)
        return EXIT_INPUT
    payload = {
        "manifold": _read_manifold(args),
        "m_values": m_values,
        "trials": args.trials,
    }
    return _finish(*_post(args.server, "/harnack", payload), args)


def cmd_serve(args):
    import uvicorn

    uvicorn.run("qecheck.service.app:app", host=args.host, port=args.port)
    return 0


def build_parser():
    p = argparse.ArgumentParser(
        prog="qecheck",
        description="curvature identity and obstruction checks on chart "
        "descriptions of weighted Riemannian metrics",
    )
    p.add_argument("--server", default=None,
                   help="URL of a running service (default: in-process)")
    sub = p.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("file", help="manifold description file")
    common.add_argument("--json", dest="json_out", default=None,
                        help="write the full JSON report here")

    v = sub.add_parser("verify", parents=[common],
                       help="run the curvature identity suites")
    v.add_argument("--tol", type=float, default=None,
                   help="decision tolerance override")
    v.add_argument("--identity-tol", type=float, default=None)
    v.set_defaults(fn=cmd_verify)

    c = sub.add_parser("check", parents=[common],
                       help="run an obstruction pipeline")
    c.add_argument("--mode", required=True,
                   choices=["qe", "soliton", "static", "rank"])
    c.add_argument("--tol", type=float, default=None)
    c.add_argument("--genericity-eps", type=float, default=None)
    c.set_defaults(fn=cmd_check)

    pot = sub.add_parser("potential", parents=[common],
                         help="reconstruct a potential along a path")
    pot.add_argument("--path", required=True)
    pot.add_argument("--subdivisions", type=int, default=64)
    pot.set_defaults(fn=cmd_potential)

    h = sub.add_parser("harnack", parents=[common],
                       help="matrix-Harnack identity and asymptotics suite")
    h.add_argument("--m", required=True, help="comma-separated m values")
    h.add_argument("--trials", type=int, default=3)
    h.set_defaults(fn=cmd_harnack)

    s = sub.add_parser("serve", help="run the HTTP service")
    s.add_argument("--host", default="127.0.0.1")
    s.add_argument("--port", type=int, default=8000)
    s.set_defaults(fn=cmd_serve)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
