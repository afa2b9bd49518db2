"""End-to-end orchestration: config -> tau -> eps -> iteration -> report.

Both the HTTP service and the command line drive solves through this
module, so outputs (convergence history, verification report, field
dumps) are produced in exactly one place.  All floating-point text is
written with 17 significant digits so files round-trip bit-faithfully.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .cones import MODES, Tau, select_tau, tau_from_values
from .driver import (
    HISTORY_CSV_HEADER,
    IterationConfig,
    IterationState,
    Outcome,
    Solution,
    assemble_solution,
    probe_epsilon,
    run,
)
from .fexpr import FExpr, evaluate_env, parse
from .grid import (
    FIELD_CSV_HEADER,
    GridField,
    field_from_rows,
    field_rows,
    make_grid,
)
from .linsolve import EllipticityLost, LinearSolveDiverged
from .symfunc import sigma_all, sigma_reduced_all
from .verify import VerificationReport, sample_lattice, verification_report
from .spectral import det_entries, s2_entries

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_EPS_EXHAUSTED = 3
EXIT_SOLVE_FAILURE = 4
EXIT_VERIFY_FAILURE = 5


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    f: str
    mode: str = "auto"
    n: int = 33
    bandwidth: float = 1.5
    eps_initial: float = 0.1
    eps_shrink: float = 0.5
    max_eps_halvings: int = 20
    max_outer: int = 30
    stop_tol: float = 1e-11
    output_dir: str = "."
    emit_fields: bool = False
    sample_n: int = 9
    threads: int = 1

    def __post_init__(self) -> None:
        if not self.f or not str(self.f).strip():
            raise ConfigError("f expression must be nonempty")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.n < 9 or self.n % 2 == 0:
            raise ConfigError(f"n must be an odd integer >= 9, got {self.n}")
        if self.bandwidth < 1.0:
            raise ConfigError(f"bandwidth must be >= 1, got {self.bandwidth}")
        if self.sample_n < 2:
            raise ConfigError(f"sample_n must be >= 2, got {self.sample_n}")
        if self.threads < 1:
            raise ConfigError(f"threads must be >= 1, got {self.threads}")
        try:
            self.iteration_config()
        except ValueError as err:
            raise ConfigError(str(err)) from err

    def iteration_config(self) -> IterationConfig:
        return IterationConfig(
            eps_initial=self.eps_initial,
            eps_shrink=self.eps_shrink,
            max_eps_halvings=self.max_eps_halvings,
            max_outer=self.max_outer,
            stop_tol=self.stop_tol,
        )


def tau_record(tau: Tau) -> dict:
    values = tau.array
    return {
        "values": [float(v) for v in values],
        "sigma": [float(v) for v in sigma_all(values)],
        "sigma_reduced": [float(v) for v in sigma_reduced_all(values)],
        "cone": tau.cone.value,
        "sigma2_target": float(tau.sigma2_target),
    }


def f_at_origin(f: FExpr) -> float:
    env = {name: 0.0 for name in ("y1", "y2", "y3", "u", "p1", "p2", "p3")}
    return float(evaluate_env(f, env))


@dataclass
class SolveResult:
    config: RunConfig
    tau: Tau
    state: IterationState
    report: VerificationReport | None
    solution: Solution | None
    exit_code: int

    @property
    def verification_pass(self) -> bool:
        return (
            self.report is not None
            and self.report.ellipticity_pass
            and self.report.convexity != "unclassified"
        )


_OUTCOME_EXIT = {
    Outcome.EPSILON_EXHAUSTED: EXIT_EPS_EXHAUSTED,
    Outcome.MAX_ITERATIONS: EXIT_SOLVE_FAILURE,
    Outcome.SOLVE_FAILURE: EXIT_SOLVE_FAILURE,
}


def solve_pipeline(cfg: RunConfig) -> SolveResult:
    """Full solve: parse, pick tau, iterate, verify."""
    f = parse(cfg.f)
    tau = select_tau(f_at_origin(f), cfg.mode)
    grid = make_grid(cfg.n, cfg.bandwidth)
    state = run(tau, f, grid, cfg.iteration_config())
    report = None
    solution = None
    if state.outcome is Outcome.CONVERGED:
        solution = assemble_solution(tau, state.eps, state.w)
        report = verification_report(solution, f, cfg.sample_n)
        exit_code = EXIT_OK
        if not (report.ellipticity_pass and report.convexity != "unclassified"):
            exit_code = EXIT_VERIFY_FAILURE
    else:
        exit_code = _OUTCOME_EXIT[state.outcome]
    return SolveResult(cfg, tau, state, report, solution, exit_code)


def sweep_pipeline(cfg: RunConfig, eps_list: list[float]) -> list[dict]:
    """choose_epsilon diagnostics at each requested eps: the initial
    residual norm and the ellipticity margin after the probe step."""
    if not eps_list:
        raise ConfigError("eps list must be nonempty")
    if any(e <= 0.0 for e in eps_list):
        raise ConfigError("all eps values must be positive")
    f = parse(cfg.f)
    tau = select_tau(f_at_origin(f), cfg.mode)
    grid = make_grid(cfg.n, cfg.bandwidth)
    itcfg = cfg.iteration_config()
    out = []
    for eps in eps_list:
        try:
            accepted, g0_sup, margin = probe_epsilon(tau, f, grid, itcfg, eps)
        except (EllipticityLost, LinearSolveDiverged) as err:
            out.append(
                {"eps": eps, "g0_sup": float("nan"), "margin": float("nan"),
                 "accepted": False, "note": str(err)}
            )
            continue
        out.append(
            {"eps": eps, "g0_sup": g0_sup, "margin": margin,
             "accepted": accepted, "note": ""}
        )
    return out


def verify_pipeline(
    f_src: str,
    tau_values,
    eps: float,
    n: int,
    bandwidth: float,
    w_rows,
    sample_n: int = 9,
) -> tuple[VerificationReport, Solution]:
    """Re-verify from dumped fields (the `verify` subcommand / endpoint)."""
    f = parse(f_src)
    tau = tau_from_values(tau_values)
    grid = make_grid(n, bandwidth)
    w = field_from_rows(grid, w_rows)
    sol = assemble_solution(tau, eps, w)
    return verification_report(sol, f, sample_n), sol


def u_sample_rows(sol: Solution, sample_n: int) -> list[tuple]:
    """Physical samples (y1, y2, y3, u, S1, S2, S3) on the report lattice."""
    pts = sample_lattice(sol, sample_n)
    u = sol.u(pts)
    entries = sol.d2u_entries(pts)
    s1 = entries[0] + entries[1] + entries[2]
    s2 = s2_entries(*entries)
    s3 = det_entries(*entries)
    return [
        (float(pts[i, 0]), float(pts[i, 1]), float(pts[i, 2]),
         float(u[i]), float(s1[i]), float(s2[i]), float(s3[i]))
        for i in range(len(pts))
    ]


U_SAMPLES_CSV_HEADER = ("y1", "y2", "y3", "u", "s1", "s2", "s3")


# ---------------------------------------------------------------------------
# Text renderings (shared by CLI output and tests)


def fmt17(x: float) -> str:
    return f"{float(x):.17g}"


def convergence_csv_text(state: IterationState) -> str:
    lines = [",".join(HISTORY_CSV_HEADER)]
    for row in state.history:
        m, g_sup, rho_sup, w_proxy, margin, eps = row.as_tuple()
        lines.append(
            ",".join([str(m)] + [fmt17(v) for v in (g_sup, rho_sup, w_proxy, margin, eps)])
        )
    return "\n".join(lines) + "\n"


def field_csv_text(f: GridField) -> str:
    lines = [",".join(FIELD_CSV_HEADER)]
    for i, j, k, x1, x2, x3, value in field_rows(f):
        lines.append(
            f"{i},{j},{k},{fmt17(x1)},{fmt17(x2)},{fmt17(x3)},{fmt17(value)}"
        )
    return "\n".join(lines) + "\n"


def u_samples_csv_text(sol: Solution, sample_n: int) -> str:
    lines = [",".join(U_SAMPLES_CSV_HEADER)]
    for row in u_sample_rows(sol, sample_n):
        lines.append(",".join(fmt17(v) for v in row))
    return "\n".join(lines) + "\n"


def sweep_csv_text(rows: list[dict]) -> str:
    lines = ["eps,g0_sup,margin"]
    for row in rows:
        lines.append(f"{fmt17(row['eps'])},{fmt17(row['g0_sup'])},{fmt17(row['margin'])}")
    return "\n".join(lines) + "\n"


def render_json(obj, indent: int = 0) -> str:
    """json.dumps with floats at 17 significant digits."""
    pad = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [
            f'{pad}  {json.dumps(str(k))}: {render_json(v, indent + 1)}'
            for k, v in obj.items()
        ]
        return "{\n" + ",\n".join(items) + f"\n{pad}}}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [f"{pad}  {render_json(v, indent + 1)}" for v in obj]
        return "[\n" + ",\n".join(items) + f"\n{pad}]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if v != v or v in (float("inf"), float("-inf")):
            return json.dumps(str(v))
        return fmt17(v)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if obj is None:
        return "null"
    return json.dumps(str(obj))


def report_json_dict(result: SolveResult) -> dict:
    report = result.report.as_dict() if result.report is not None else None
    run_meta = {
        "tau": tau_record(result.tau),
        "eps": result.state.eps,
        "n": result.config.n,
        "outcome": result.state.outcome.value,
        "iterations": result.state.m,
        "g0_sup": result.state.g0_sup,
        "stop_threshold": result.state.stop_threshold,
        "ellipticity_pass": (
            result.report.ellipticity_pass if result.report is not None else False
        ),
        "verification_pass": result.verification_pass,
        "failure": result.state.failure,
    }
    out = dict(report) if report is not None else {}
    out["run"] = run_meta
    out["config"] = asdict(result.config)
    return out


def report_json_text(result: SolveResult) -> str:
    return render_json(report_json_dict(result)) + "\n"
