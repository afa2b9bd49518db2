"""Local solutions of the elliptic 2-Hessian equation in R^3.

Solves S2[u] = f(y, u, Du) near the origin with the ansatz
u = sum tau_i y_i^2 / 2 + eps^5 w(y / eps^2): cone-parameter selection,
a Newton-type iteration with linearized elliptic Dirichlet solves on the
unit ball, and independent verification of ellipticity and convexity.
"""

from .cones import Tau, select_tau, tau_convex, tau_negative, tau_positive_nonconvex, tau_zero
from .driver import (
    IterationConfig,
    IterationState,
    Outcome,
    Solution,
    assemble_solution,
    choose_epsilon,
    run,
)
from .fexpr import FExpr, FPoint, evaluate, parse, partial
from .grid import BallGrid, GridField, d1, d2, hessian_at, make_grid, norms
from .linsolve import assemble, residual_G, solve_dirichlet
from .pipeline import RunConfig, solve_pipeline, sweep_pipeline, verify_pipeline
from .spectral import SymMat3, eigen, ellipticity_margin, s2_gradient, s2_value
from .symfunc import ConeClass, classify_cone, maclaurin_holds, sigma, sigma_reduced
from .verify import VerificationReport, classify_solution, ellipticity_report, physical_residual

__version__ = "0.1.0"

__all__ = [
    "BallGrid",
    "ConeClass",
    "FExpr",
    "FPoint",
    "GridField",
    "IterationConfig",
    "IterationState",
    "Outcome",
    "RunConfig",
    "Solution",
    "SymMat3",
    "Tau",
    "VerificationReport",
    "assemble",
    "assemble_solution",
    "choose_epsilon",
    "classify_cone",
    "classify_solution",
    "d1",
    "d2",
    "eigen",
    "ellipticity_margin",
    "ellipticity_report",
    "evaluate",
    "hessian_at",
    "maclaurin_holds",
    "make_grid",
    "norms",
    "parse",
    "partial",
    "physical_residual",
    "residual_G",
    "run",
    "s2_gradient",
    "s2_value",
    "select_tau",
    "sigma",
    "sigma_reduced",
    "solve_dirichlet",
    "solve_pipeline",
    "sweep_pipeline",
    "tau_convex",
    "tau_negative",
    "tau_positive_nonconvex",
    "tau_zero",
    "verify_pipeline",
]
