"""Command-line front end.

A thin client over the service layer: subcommands build the same request
models the HTTP endpoints accept and either call the handlers in process
(default) or POST them to a running server (--server URL).  The CLI's own
job is flag/config handling, writing artifacts, and exit codes:

    0  success (converged and verification passed)
    2  config or parse error
    3  epsilon ladder exhausted
    4  linear solve failure / iteration limit
    5  verification failure
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .pipeline import (
    EXIT_CONFIG,
    EXIT_VERIFY_FAILURE,
    render_json,
    fmt17,
)
from .service import handlers, schemas

CONFIG_KEYS = {
    "f": str,
    "f0": float,
    "mode": str,
    "n": int,
    "bandwidth": float,
    "eps": float,
    "eps_shrink": float,
    "max_eps_halvings": int,
    "max_outer": int,
    "stop_tol": float,
    "out": str,
    "emit_fields": bool,
    "threads": int,
    "sample_n": int,
    "server": str,
}


def _parse_bool(text: str) -> bool:
    if text.lower() in ("1", "true", "yes", "on"):
        return True
    if text.lower() in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def load_config_file(path: str) -> dict:
    """Flat key=value file; '#' starts a comment."""
    out: dict = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
        caster = CONFIG_KEYS[key]
        out[key] = _parse_bool(value) if caster is bool else caster(value)
    return out


def _merged(args: argparse.Namespace, keys: tuple[str, ...]) -> dict:
    """Config file values overridden by explicitly given CLI flags."""
    merged: dict = {}
    if getattr(args, "config", None):
        loaded = load_config_file(args.config)
        merged.update({k: v for k, v in loaded.items() if k in keys})
    for key in keys:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    return merged


def _fail(message: str, code: int) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


class _Remote:
    """POST the request models to a running service."""

    def __init__(self, base_url: str):
        self.base_url = base_url.rstrip("/")

    def call(self, endpoint: str, request, response_model):
        import httpx

        resp = httpx.post(
            f"{self.base_url}/{endpoint}",
            json=json.loads(request.model_dump_json()),
            timeout=None,
        )
        if resp.status_code == 400:
            raise handlers.RequestError(resp.json().get("detail", resp.text))
        resp.raise_for_status()
        return response_model.model_validate(resp.json())


def _dispatch(args, endpoint: str, request, response_model, local_handler):
    server = getattr(args, "server", None)
    if server:
        return _Remote(server).call(endpoint, request, response_model)
    return local_handler(request)


# ---------------------------------------------------------------------------
# Artifact writers (render from response models so local and remote runs
# produce identical bytes)


def write_solve_artifacts(resp: schemas.SolveResponse, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    lines = ["m,g_sup,rho_sup,w_proxy,ellipticity_margin,eps"]
    for r in resp.history:
        lines.append(
            ",".join(
                [str(r.m)]
                + [fmt17(v) for v in (r.g_sup, r.rho_sup, r.w_proxy,
                                      r.ellipticity_margin, r.eps)]
            )
        )
    (out_dir / "convergence.csv").write_text("\n".join(lines) + "\n")

    doc: dict = dict(resp.report.model_dump()) if resp.report is not None else {}
    doc["run"] = resp.run.model_dump()
    doc["config"] = resp.config
    (out_dir / "report.json").write_text(render_json(doc) + "\n")

    if resp.w_field is not None:
        lines = ["i,j,k,x1,x2,x3,value"]
        for r in resp.w_field:
            lines.append(
                f"{r.i},{r.j},{r.k},{fmt17(r.x1)},{fmt17(r.x2)},{fmt17(r.x3)},"
                f"{fmt17(r.value)}"
            )
        (out_dir / "w.csv").write_text("\n".join(lines) + "\n")
    if resp.u_samples is not None:
        lines = ["y1,y2,y3,u,s1,s2,s3"]
        for r in resp.u_samples:
            lines.append(
                ",".join(fmt17(v) for v in (r.y1, r.y2, r.y3, r.u, r.s1, r.s2, r.s3))
            )
        (out_dir / "u-samples.csv").write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# Subcommands


def cmd_tau(args) -> int:
    merged = _merged(args, ("f0", "mode"))
    if "f0" not in merged:
        return _fail("tau requires --f0", EXIT_CONFIG)
    req = schemas.TauRequest(f0=merged["f0"], mode=merged.get("mode", "auto"))
    try:
        record = _dispatch(args, "tau", req, schemas.TauRecord, handlers.handle_tau)
    except handlers.RequestError as err:
        return _fail(str(err), EXIT_CONFIG)
    print(render_json(record.model_dump()))
    return 0


_SOLVE_KEYS = (
    "f", "mode", "n", "bandwidth", "eps", "eps_shrink", "max_eps_halvings",
    "max_outer", "stop_tol", "out", "emit_fields", "threads", "sample_n",
)


def _solve_request(merged: dict) -> schemas.SolveRequest:
    kwargs = dict(merged)
    if "eps" in kwargs:
        kwargs["eps_initial"] = kwargs.pop("eps")
    if "out" in kwargs:
        kwargs["output_dir"] = kwargs.pop("out")
    return schemas.SolveRequest(**kwargs)


def cmd_solve(args) -> int:
    merged = _merged(args, _SOLVE_KEYS)
    if "f" not in merged:
        return _fail("solve requires --f", EXIT_CONFIG)
    try:
        req = _solve_request(merged)
        resp = _dispatch(args, "solve", req, schemas.SolveResponse, handlers.handle_solve)
    except handlers.RequestError as err:
        return _fail(str(err), EXIT_CONFIG)
    except Exception as err:  # pydantic validation of bad flag combos
        return _fail(str(err), EXIT_CONFIG)
    out_dir = Path(merged.get("out", "."))
    write_solve_artifacts(resp, out_dir)
    print(
        f"outcome={resp.outcome} eps={fmt17(resp.run.eps)} "
        f"iterations={resp.run.iterations} "
        f"convexity={resp.report.convexity if resp.report else 'n/a'} "
        f"artifacts={out_dir}"
    )
    if resp.exit_code != 0:
        return _fail(
            f"solve finished with outcome={resp.outcome}"
            + (f": {resp.run.failure}" if resp.run.failure else ""),
            resp.exit_code,
        )
    return 0


def cmd_sweep(args) -> int:
    merged = _merged(args, ("f", "mode", "n", "bandwidth", "stop_tol", "out"))
    if "f" not in merged:
        return _fail("sweep requires --f", EXIT_CONFIG)
    eps_text = args.eps if args.eps is not None else ""
    try:
        eps_list = [float(tok) for tok in eps_text.split(",") if tok.strip()]
    except ValueError:
        return _fail(f"bad eps list {eps_text!r}", EXIT_CONFIG)
    if not eps_list:
        return _fail("sweep requires --eps as a comma-separated list", EXIT_CONFIG)
    req = schemas.SweepRequest(
        f=merged["f"],
        mode=merged.get("mode", "auto"),
        n=merged.get("n", 33),
        bandwidth=merged.get("bandwidth", 1.5),
        stop_tol=merged.get("stop_tol", 1e-11),
        eps_list=eps_list,
    )
    try:
        resp = _dispatch(args, "sweep", req, schemas.SweepResponse, handlers.handle_sweep)
    except handlers.RequestError as err:
        return _fail(str(err), EXIT_CONFIG)
    lines = ["eps,g0_sup,margin"]
    for row in resp.rows:
        lines.append(f"{fmt17(row.eps)},{fmt17(row.g0_sup)},{fmt17(row.margin)}")
    text = "\n".join(lines) + "\n"
    if "out" in merged:
        out_dir = Path(merged["out"])
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "sweep.csv").write_text(text)
    sys.stdout.write(text)
    return 0


def cmd_verify(args) -> int:
    merged = _merged(args, ("out", "sample_n"))
    out_dir = Path(merged.get("out", "."))
    report_path = out_dir / "report.json"
    w_path = out_dir / "w.csv"
    if not report_path.exists():
        return _fail(f"missing {report_path}", EXIT_CONFIG)
    if not w_path.exists():
        return _fail(f"missing {w_path} (rerun solve with --emit-fields)", EXIT_CONFIG)
    doc = json.loads(report_path.read_text())
    run_meta = doc["run"]
    config = doc["config"]
    rows = []
    for line in w_path.read_text().splitlines()[1:]:
        parts = line.split(",")
        rows.append(
            schemas.FieldRowModel(
                i=int(parts[0]), j=int(parts[1]), k=int(parts[2]),
                x1=float(parts[3]), x2=float(parts[4]), x3=float(parts[5]),
                value=float(parts[6]),
            )
        )
    req = schemas.VerifyRequest(
        f=config["f"],
        tau_values=run_meta["tau"]["values"],
        eps=run_meta["eps"],
        n=config["n"],
        bandwidth=config["bandwidth"],
        sample_n=merged.get("sample_n", config.get("sample_n", 9)),
        w_field=rows,
    )
    try:
        resp = _dispatch(args, "verify", req, schemas.VerifyResponse, handlers.handle_verify)
    except handlers.RequestError as err:
        return _fail(str(err), EXIT_CONFIG)
    print(render_json(resp.report.model_dump()))
    if not resp.verification_pass:
        return _fail("verification failed", EXIT_VERIFY_FAILURE)
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service.app import app

    uvicorn.run(app, host=args.host, port=args.port)
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hessian2",
        description="Solve S2[u] = f(y, u, Du) locally near the origin in R^3.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="flat key=value config file")
        p.add_argument("--server", help="base URL of a running service")

    p_tau = sub.add_parser("tau", help="print the cone parameter for a given f(Z0)")
    p_tau.add_argument("--f0", type=float)
    p_tau.add_argument("--mode", choices=("auto", "convex", "nonconvex"))
    common(p_tau)
    p_tau.set_defaults(func=cmd_tau)

    p_solve = sub.add_parser("solve", help="run the full solve and verification")
    p_solve.add_argument("--f", help="right-hand side expression f(y1..y3, u, p1..p3)")
    p_solve.add_argument("--mode", choices=("auto", "convex", "nonconvex"))
    p_solve.add_argument("--n", type=int, help="grid nodes per axis (odd, >= 9)")
    p_solve.add_argument("--bandwidth", type=float)
    p_solve.add_argument("--eps", type=float, help="initial eps for the ladder")
    p_solve.add_argument("--eps-shrink", dest="eps_shrink", type=float)
    p_solve.add_argument("--max-eps-halvings", dest="max_eps_halvings", type=int)
    p_solve.add_argument("--max-outer", dest="max_outer", type=int)
    p_solve.add_argument("--stop-tol", dest="stop_tol", type=float)
    p_solve.add_argument("--out", help="output directory for artifacts")
    p_solve.add_argument(
        "--emit-fields", dest="emit_fields", action="store_const", const=True,
        help="also dump w.csv and u-samples.csv",
    )
    p_solve.add_argument("--threads", type=int)
    p_solve.add_argument("--sample-n", dest="sample_n", type=int)
    common(p_solve)
    p_solve.set_defaults(func=cmd_solve)

    p_sweep = sub.add_parser("sweep", help="eps diagnostics: g0 norm and margin")
    p_sweep.add_argument("--f")
    p_sweep.add_argument("--mode", choices=("auto", "convex", "nonconvex"))
    p_sweep.add_argument("--n", type=int)
    p_sweep.add_argument("--bandwidth", type=float)
    p_sweep.add_argument("--eps", help="comma-separated eps list")
    p_sweep.add_argument("--stop-tol", dest="stop_tol", type=float)
    p_sweep.add_argument("--out")
    common(p_sweep)
    p_sweep.set_defaults(func=cmd_sweep)

    p_verify = sub.add_parser("verify", help="re-verify from dumped fields")
    p_verify.add_argument("--out", help="directory holding report.json and w.csv")
    p_verify.add_argument("--sample-n", dest="sample_n", type=int)
    common(p_verify)
    p_verify.set_defaults(func=cmd_verify)

    p_serve = sub.add_parser("serve", help="run the HTTP service")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8000)
    p_serve.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as err:
        return _fail(str(err), EXIT_CONFIG)


if __name__ == "__main__":
    sys.exit(main())
