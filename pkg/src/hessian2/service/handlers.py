"""Service handlers: the single implementation behind both the HTTP
endpoints and the local CLI client."""

from __future__ import annotations

from ..cones import select_tau
from ..driver import Outcome
from ..fexpr import FEvalError, FParseError
from ..pipeline import (
    ConfigError,
    RunConfig,
    SolveResult,
    solve_pipeline,
    sweep_pipeline,
    tau_record,
    u_sample_rows,
    verify_pipeline,
)
from ..grid import field_rows
from . import schemas


class RequestError(ValueError):
    """Invalid request payload (maps to HTTP 400 / CLI exit 2)."""


def _guard(fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except (ConfigError, FParseError, FEvalError, ValueError) as err:
        raise RequestError(str(err)) from err


def handle_tau(req: schemas.TauRequest) -> schemas.TauRecord:
    tau = _guard(select_tau, req.f0, req.mode)
    return schemas.TauRecord(**tau_record(tau))


def _run_config(req: schemas.SolveRequest) -> RunConfig:
    return RunConfig(
        f=req.f,
        mode=req.mode,
        n=req.n,
        bandwidth=req.bandwidth,
        eps_initial=req.eps_initial,
        eps_shrink=req.eps_shrink,
        max_eps_halvings=req.max_eps_halvings,
        max_outer=req.max_outer,
        stop_tol=req.stop_tol,
        output_dir=req.output_dir,
        emit_fields=req.emit_fields,
        sample_n=req.sample_n,
        threads=req.threads,
    )


def solve_response(result: SolveResult) -> schemas.SolveResponse:
    from ..pipeline import report_json_dict

    doc = report_json_dict(result)
    history = [
        schemas.HistoryRowModel(
            m=r.m, g_sup=r.g_sup, rho_sup=r.rho_sup, w_proxy=r.w_proxy,
            ellipticity_margin=r.ellipticity_margin, eps=r.eps,
        )
        for r in result.state.history
    ]
    report = None
    if result.report is not None:
        report = schemas.VerificationReportModel(**result.report.as_dict())
    w_field = None
    u_samples = None
    if result.config.emit_fields and result.solution is not None:
        w_field = [
            schemas.FieldRowModel(i=i, j=j, k=k, x1=x1, x2=x2, x3=x3, value=v)
            for i, j, k, x1, x2, x3, v in field_rows(result.state.w)
        ]
        u_samples = [
            schemas.USampleRowModel(y1=a, y2=b, y3=c, u=u, s1=s1, s2=s2, s3=s3)
            for a, b, c, u, s1, s2, s3 in u_sample_rows(
                result.solution, result.config.sample_n
            )
        ]
    return schemas.SolveResponse(
        outcome=result.state.outcome.value,
        exit_code=result.exit_code,
        run=schemas.RunMeta(**doc["run"]),
        history=history,
        report=report,
        config=doc["config"],
        w_field=w_field,
        u_samples=u_samples,
    )


def handle_solve(req: schemas.SolveRequest) -> schemas.SolveResponse:
    cfg = _guard(_run_config, req)
    result = _guard(solve_pipeline, cfg)
    return solve_response(result)


def handle_sweep(req: schemas.SweepRequest) -> schemas.SweepResponse:
    cfg = _guard(
        RunConfig,
        f=req.f,
        mode=req.mode,
        n=req.n,
        bandwidth=req.bandwidth,
        stop_tol=req.stop_tol,
    )
    rows = _guard(sweep_pipeline, cfg, req.eps_list)
    return schemas.SweepResponse(rows=[schemas.SweepRowModel(**r) for r in rows])


def handle_verify(req: schemas.VerifyRequest) -> schemas.VerifyResponse:
    rows = [(r.i, r.j, r.k, r.x1, r.x2, r.x3, r.value) for r in req.w_field]
    report, _ = _guard(
        verify_pipeline,
        req.f,
        req.tau_values,
        req.eps,
        req.n,
        req.bandwidth,
        rows,
        req.sample_n,
    )
    return schemas.VerifyResponse(
        report=schemas.VerificationReportModel(**report.as_dict()),
        ellipticity_pass=report.ellipticity_pass,
        verification_pass=report.ellipticity_pass
        and report.convexity != "unclassified",
    )


__all__ = [
    "RequestError",
    "handle_tau",
    "handle_solve",
    "handle_sweep",
    "handle_verify",
    "solve_response",
]


def handle_outcome_exit(outcome: str) -> int:
    """Exit code for a solve outcome without verification flags."""
    from ..pipeline import EXIT_EPS_EXHAUSTED, EXIT_OK, EXIT_SOLVE_FAILURE

    if outcome == Outcome.CONVERGED.value:
        return EXIT_OK
    if outcome == Outcome.EPSILON_EXHAUSTED.value:
        return EXIT_EPS_EXHAUSTED
    return EXIT_SOLVE_FAILURE
