"""Outer iteration: damped-free Newton steps on the rescaled residual.

Starting from w = 0, each step solves the linearized Dirichlet problem
against g_m = -G(w_m) and adds the correction.  eps is selected by a
probe (largest eps_initial * eps_shrink^j whose first step contracts the
residual by 4x), and the iterate norm is capped at w_cap; violating the
cap restarts the whole iteration at a smaller eps rather than damping.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .cones import Tau
from .fexpr import FEvalError, FExpr
from .grid import BallGrid, GridField, gradient_fields, hessian_fields, norms, sample_trilinear
from .linsolve import (
    EllipticityLost,
    LinearSolveDiverged,
    assemble,
    ellipticity_margins,
    residual_G,
    solve_dirichlet,
)


class EpsilonExhausted(RuntimeError):
    def __init__(self, tried: list[float]):
        super().__init__(
            f"no eps in {tried[0]:.3g}..{tried[-1]:.3g} passed the probe "
            f"({len(tried)} values tried)"
        )
        self.tried = tried


class OutOfNeighborhoodError(ValueError):
    pass


class Outcome(enum.Enum):
    CONVERGED = "Converged"
    EPSILON_EXHAUSTED = "EpsilonExhausted"
    MAX_ITERATIONS = "MaxIterations"
    SOLVE_FAILURE = "SolveFailure"


@dataclass
class IterationConfig:
    eps_initial: float = 0.1
    eps_shrink: float = 0.5
    max_eps_halvings: int = 20
    max_outer: int = 30
    stop_tol: float = 1e-11
    w_cap: float = 1.0
    damping: float = 1.0
    lin_tol: float | None = None   # None: min(1e-10, stop_tol/20)
    lin_maxiter: int | None = None
    lin_method: str = "auto"

    def __post_init__(self) -> None:
        if self.eps_initial <= 0.0:
            raise ValueError("eps_initial must be positive")
        if not 0.0 < self.eps_shrink < 1.0:
            raise ValueError("eps_shrink must be in (0, 1)")
        for name in ("max_eps_halvings", "max_outer"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.stop_tol <= 0.0:
            raise ValueError("stop_tol must be positive")
        if self.w_cap <= 0.0:
            raise ValueError("w_cap must be positive")
        if not 0.0 < self.damping <= 1.0:
            raise ValueError("damping must be in (0, 1]")

    @property
    def effective_lin_tol(self) -> float:
        # the linear solve has to land well below the outer stopping level,
        # otherwise its leftover residual becomes the floor of g
        if self.lin_tol is not None:
            return self.lin_tol
        return min(1e-10, self.stop_tol / 20.0)


@dataclass
class HistoryRow:
    m: int
    g_sup: float
    rho_sup: float
    w_proxy: float
    ellipticity_margin: float
    eps: float

    def as_tuple(self) -> tuple:
        return (self.m, self.g_sup, self.rho_sup, self.w_proxy,
                self.ellipticity_margin, self.eps)


HISTORY_CSV_HEADER = ("m", "g_sup", "rho_sup", "w_proxy", "ellipticity_margin", "eps")


@dataclass
class IterationState:
    eps: float
    m: int
    w: GridField
    g: GridField
    history: list[HistoryRow] = field(default_factory=list)
    outcome: Outcome = Outcome.MAX_ITERATIONS
    g0_sup: float = 0.0
    stop_threshold: float = 0.0
    failure: str = ""


class _Restart(Exception):
    """Internal: iterate left the admissible regime; retry at smaller eps."""


def _eps_ladder(cfg: IterationConfig) -> list[float]:
    return [
        cfg.eps_initial * cfg.eps_shrink ** j
        for j in range(cfg.max_eps_halvings + 1)
    ]


def probe_epsilon(
    tau: Tau, f: FExpr, grid: BallGrid, cfg: IterationConfig, eps: float
) -> tuple[bool, float, float]:
    """One trial step at a candidate eps.

    Returns (accepted, g0_sup, margin after the trial step).
    """
    w0 = GridField.zeros(grid)
    g0 = -residual_G(w0, tau, eps, f)
    g0_sup = g0.sup()
    margin0 = float(ellipticity_margins(w0, tau, eps).min())
    if margin0 < 0.5 * tau.min_pair_sum:
        return False, g0_sup, margin0
    if g0_sup <= cfg.stop_tol:
        return True, g0_sup, margin0
    a = assemble(w0, tau, eps, f)
    rho = solve_dirichlet(
        a, g0, tol=cfg.effective_lin_tol, maxiter=cfg.lin_maxiter, method=cfg.lin_method
    )
    w1 = w0 + rho
    g1 = -residual_G(w1, tau, eps, f)
    margin1 = float(ellipticity_margins(w1, tau, eps).min())
    return g1.sup() <= 0.25 * g0_sup, g0_sup, margin1


def choose_epsilon(tau: Tau, f: FExpr, grid: BallGrid, cfg: IterationConfig) -> float:
    """Largest eps on the shrink ladder whose probe step contracts."""
    tried: list[float] = []
    for eps in _eps_ladder(cfg):
        tried.append(eps)
        try:
            ok, _, _ = probe_epsilon(tau, f, grid, cfg, eps)
        except (EllipticityLost, LinearSolveDiverged, FEvalError):
            continue
        if ok:
            return eps
    raise EpsilonExhausted(tried)


def _iterate(
    tau: Tau, f: FExpr, grid: BallGrid, cfg: IterationConfig, eps: float
) -> IterationState:
    w = GridField.zeros(grid)
    state = IterationState(eps=eps, m=0, w=w, g=GridField.zeros(grid))
    threshold = None
    for m in range(cfg.max_outer + 1):
        g = -residual_G(w, tau, eps, f)
        g_sup = g.sup()
        if threshold is None:
            state.g0_sup = g_sup
            threshold = cfg.stop_tol * (1.0 + g_sup)
            state.stop_threshold = threshold
        margin = float(ellipticity_margins(w, tau, eps).min())
        w_proxy = norms(w, 2)
        state.m, state.w, state.g = m, w, g
        if g_sup <= threshold:
            state.history.append(HistoryRow(m, g_sup, 0.0, w_proxy, margin, eps))
            state.outcome = Outcome.CONVERGED
            return state
        if m == cfg.max_outer:
            state.history.append(HistoryRow(m, g_sup, 0.0, w_proxy, margin, eps))
            state.outcome = Outcome.MAX_ITERATIONS
            return state
        a = assemble(w, tau, eps, f)  # EllipticityLost propagates to run()
        try:
            rho = solve_dirichlet(
                a, g, tol=cfg.effective_lin_tol, maxiter=cfg.lin_maxiter,
                method=cfg.lin_method,
            )
        except LinearSolveDiverged as err:
            state.history.append(HistoryRow(m, g_sup, 0.0, w_proxy, margin, eps))
            state.outcome = Outcome.SOLVE_FAILURE
            state.failure = str(err)
            return state
        w_next = w + cfg.damping * rho
        proxy_next = norms(w_next, 2)
        if proxy_next > cfg.w_cap:
            raise _Restart
        state.history.append(HistoryRow(m, g_sup, rho.sup(), w_proxy, margin, eps))
        w = w_next
    raise AssertionError("unreachable")


def run(tau: Tau, f: FExpr, grid: BallGrid, cfg: IterationConfig) -> IterationState:
    """Full scheme: select eps, iterate, restart at smaller eps when the
    iterate norm cap or ellipticity is violated."""
    ladder = _eps_ladder(cfg)
    try:
        eps = choose_epsilon(tau, f, grid, cfg)
    except EpsilonExhausted as err:
        state = IterationState(
            eps=ladder[-1], m=0, w=GridField.zeros(grid), g=GridField.zeros(grid)
        )
        state.outcome = Outcome.EPSILON_EXHAUSTED
        state.failure = str(err)
        return state
    start = ladder.index(eps)
    for eps_try in ladder[start:]:
        try:
            return _iterate(tau, f, grid, cfg, eps_try)
        except (_Restart, EllipticityLost):
            continue
    state = IterationState(
        eps=ladder[-1], m=0, w=GridField.zeros(grid), g=GridField.zeros(grid)
    )
    state.outcome = Outcome.EPSILON_EXHAUSTED
    state.failure = "norm cap or ellipticity failed at every eps on the ladder"
    return state


# ---------------------------------------------------------------------------
# Physical solution record


@dataclass
class Solution:
    """Evaluates u(y) = sum tau_i y_i^2 / 2 + eps^5 w(y/eps^2) and its
    derivatives on the physical neighborhood |y| < eps^2 (1 - h bandwidth)."""

    tau: Tau
    eps: float
    w: GridField

    def __post_init__(self) -> None:
        self._w1, self._w2, self._w3 = gradient_fields(self.w)
        self._hess = hessian_fields(self.w)

    @property
    def grid(self) -> BallGrid:
        return self.w.grid

    @property
    def radius(self) -> float:
        return self.eps * self.eps * self.grid.interior_radius

    def _to_lattice(self, y: np.ndarray) -> np.ndarray:
        y = np.atleast_2d(np.asarray(y, dtype=float))
        r = np.sqrt((y * y).sum(axis=1))
        if np.any(r >= self.radius):
            worst = float(r.max())
            raise OutOfNeighborhoodError(
                f"|y| = {worst:.6g} outside the solution neighborhood "
                f"radius {self.radius:.6g}"
            )
        return y / (self.eps * self.eps)

    def u(self, y: np.ndarray) -> np.ndarray:
        yy = np.atleast_2d(np.asarray(y, dtype=float))
        x = self._to_lattice(yy)
        t = self.tau.array
        psi = 0.5 * (yy * yy * t[np.newaxis, :]).sum(axis=1)
        return psi + self.eps ** 5 * sample_trilinear(self.w, x)

    def du(self, y: np.ndarray) -> np.ndarray:
        yy = np.atleast_2d(np.asarray(y, dtype=float))
        x = self._to_lattice(yy)
        t = self.tau.array
        e3 = self.eps ** 3
        cols = [
            t[i] * yy[:, i] + e3 * sample_trilinear(w_i, x)
            for i, w_i in enumerate((self._w1, self._w2, self._w3))
        ]
        return np.column_stack(cols)

    def d2u_entries(self, y: np.ndarray) -> tuple[np.ndarray, ...]:
        """Hessian of u at y as entry arrays (m11, m22, m33, m12, m13, m23)."""
        x = self._to_lattice(y)
        t = self.tau.array
        eps = self.eps
        m11 = t[0] + eps * sample_trilinear(self._hess[(1, 1)], x)
        m22 = t[1] + eps * sample_trilinear(self._hess[(2, 2)], x)
        m33 = t[2] + eps * sample_trilinear(self._hess[(3, 3)], x)
        m12 = eps * sample_trilinear(self._hess[(1, 2)], x)
        m13 = eps * sample_trilinear(self._hess[(1, 3)], x)
        m23 = eps * sample_trilinear(self._hess[(2, 3)], x)
        return m11, m22, m33, m12, m13, m23

    def d2u(self, y: np.ndarray) -> np.ndarray:
        """Hessian matrices, shape (N, 3, 3)."""
        m11, m22, m33, m12, m13, m23 = self.d2u_entries(y)
        out = np.empty((len(m11), 3, 3))
        out[:, 0, 0] = m11
        out[:, 1, 1] = m22
        out[:, 2, 2] = m33
        out[:, 0, 1] = out[:, 1, 0] = m12
        out[:, 0, 2] = out[:, 2, 0] = m13
        out[:, 1, 2] = out[:, 2, 1] = m23
        return out


def assemble_solution(tau: Tau, eps: float, w: GridField) -> Solution:
    if eps <= 0.0:
        raise ValueError(f"eps must be positive, got {eps}")
    return Solution(tau, eps, w)
