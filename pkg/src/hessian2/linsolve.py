"""Rescaled nonlinear residual, its linearization, and the Dirichlet solve.

The nonlinear map on the unit-ball grid is

    G(w) = (1/eps) [ S2(diag(tau) + eps D2w) - f(eps^2 x, eps^4 psi + eps^5 w,
                     (tau_i eps^2 x_i + eps^3 w_i)_i) ],   psi = sum tau_i x_i^2 / 2.

Its linearization is a nondivergence-form second-order operator whose
principal coefficients are trace(r) I - r at each node, discretized with
the 19-point central stencil, plus first/zeroth order terms from the
partials of f scaled by eps^2 and eps^4.  The solver is a restart-free
Jacobi-preconditioned BiCGSTAB with a sparse-LU fallback; a dense direct
path exists as an oracle for small grids.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .cones import Tau
from .fexpr import FEvalError, FExpr, evaluate_env, partial
from .grid import BallGrid, GridField, d1, d2, lattice_shift
from .spectral import min_pair_sum_entries, s2_entries


class EllipticityLost(RuntimeError):
    """The linearized operator stopped being elliptic at some node."""

    def __init__(self, node: tuple[int, int, int], margin: float):
        super().__init__(
            f"ellipticity margin {margin:.6g} <= 0 at node {node}; "
            "eps is too large or the iterate left the norm cap"
        )
        self.node = node
        self.margin = margin


class LinearSolveDiverged(RuntimeError):
    def __init__(self, iterations: int, residual: float):
        super().__init__(
            f"linear solve stalled after {iterations} iterations, "
            f"sup residual {residual:.6g}"
        )
        self.iterations = iterations
        self.residual = residual


def _interior_coords(grid: BallGrid) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    x1, x2, x3 = grid.xgrids
    m = grid.interior
    return x1[m], x2[m], x3[m]


def transformed_env(
    grid: BallGrid, tau: Tau, eps: float, w: GridField
) -> dict[str, np.ndarray]:
    """Arguments of f at every interior node, as 1-d arrays."""
    t1, t2, t3 = tau.values
    x1, x2, x3 = _interior_coords(grid)
    wv = w.interior_values()
    w1 = d1(w, 1).interior_values()
    w2 = d1(w, 2).interior_values()
    w3 = d1(w, 3).interior_values()
    psi = 0.5 * (t1 * x1 * x1 + t2 * x2 * x2 + t3 * x3 * x3)
    e2 = eps * eps
    e3 = e2 * eps
    e4 = e2 * e2
    return {
        "y1": e2 * x1,
        "y2": e2 * x2,
        "y3": e2 * x3,
        "u": e4 * psi + e4 * eps * wv,
        "p1": t1 * e2 * x1 + e3 * w1,
        "p2": t2 * e2 * x2 + e3 * w2,
        "p3": t3 * e2 * x3 + e3 * w3,
    }


def _located(err: FEvalError, grid: BallGrid) -> FEvalError:
    node = tuple(int(v) for v in np.argwhere(grid.interior)[err.first_bad])
    coords = tuple(float(grid.coords[i]) for i in node)
    new = FEvalError(
        f"{err.args[0]} at node {node}, x={coords}", err.subexpr, err.first_bad
    )
    return new


def _r_entries(w: GridField, tau: Tau, eps: float) -> tuple[np.ndarray, ...]:
    """Entries of r(w) = diag(tau) + eps D2w on interior nodes (1-d)."""
    t1, t2, t3 = tau.values
    m = w.grid.interior
    h11 = d2(w, (1, 1)).data[m]
    h22 = d2(w, (2, 2)).data[m]
    h33 = d2(w, (3, 3)).data[m]
    h12 = d2(w, (1, 2)).data[m]
    h13 = d2(w, (1, 3)).data[m]
    h23 = d2(w, (2, 3)).data[m]
    return (
        t1 + eps * h11,
        t2 + eps * h22,
        t3 + eps * h33,
        eps * h12,
        eps * h13,
        eps * h23,
    )


def residual_G(w: GridField, tau: Tau, eps: float, f: FExpr) -> GridField:
    """G(w) on the grid: transformed equation residual at the iterate."""
    if eps <= 0.0:
        raise ValueError(f"eps must be positive, got {eps}")
    grid = w.grid
    r11, r22, r33, r12, r13, r23 = _r_entries(w, tau, eps)
    s2 = s2_entries(r11, r22, r33, r12, r13, r23)
    env = transformed_env(grid, tau, eps, w)
    try:
        fval = evaluate_env(f, env)
    except FEvalError as err:
        if err.first_bad is not None:
            raise _located(err, grid) from err
        raise
    out = np.zeros((grid.n,) * 3)
    out[grid.interior] = (s2 - fval) / eps
    return GridField(grid, out)


def ellipticity_margins(w: GridField, tau: Tau, eps: float) -> np.ndarray:
    """Per-interior-node min pairwise eigenvalue sum of r(w)."""
    r = _r_entries(w, tau, eps)
    return np.asarray(min_pair_sum_entries(*r))


@dataclass
class OperatorAssembly:
    """Sparse linearized operator over interior nodes, with the per-node
    coefficient arrays kept for inspection."""

    grid: BallGrid
    eps: float
    matrix: sp.csr_matrix
    node_ids: np.ndarray          # (n,n,n) int, -1 off interior
    c_pure: tuple[np.ndarray, np.ndarray, np.ndarray]
    c_mixed: tuple[np.ndarray, np.ndarray, np.ndarray]
    a_first: tuple[np.ndarray, np.ndarray, np.ndarray]
    a_zero: np.ndarray
    margin_min: float

    def apply(self, f: GridField) -> GridField:
        out = np.zeros((self.grid.n,) * 3)
        out[self.grid.interior] = self.matrix @ f.interior_values()
        return GridField(self.grid, out)


def _node_id_map(grid: BallGrid) -> np.ndarray:
    ids = np.full((grid.n,) * 3, -1, dtype=np.int64)
    ids[grid.interior] = np.arange(grid.interior_count)
    return ids


def assemble(w: GridField, tau: Tau, eps: float, f: FExpr) -> OperatorAssembly:
    """Linearized operator at the iterate w (19-point stencil)."""
    grid = w.grid
    n_int = grid.interior_count
    r11, r22, r33, r12, r13, r23 = _r_entries(w, tau, eps)

    margins = np.asarray(min_pair_sum_entries(r11, r22, r33, r12, r13, r23))
    margin_min = float(margins.min())
    if margin_min <= 0.0:
        worst = int(np.argmin(margins))
        node = tuple(int(v) for v in np.argwhere(grid.interior)[worst])
        raise EllipticityLost(node, margin_min)

    # gradient of S2 at r: trace(r) I - r
    c11 = r22 + r33
    c22 = r11 + r33
    c33 = r11 + r22
    c12 = -r12
    c13 = -r13
    c23 = -r23

    env = transformed_env(grid, tau, eps, w)
    e2 = eps * eps
    a1 = -e2 * _eval_broadcast(partial(f, "p1"), env, grid, n_int)
    a2 = -e2 * _eval_broadcast(partial(f, "p2"), env, grid, n_int)
    a3 = -e2 * _eval_broadcast(partial(f, "p3"), env, grid, n_int)
    a0 = -e2 * e2 * _eval_broadcast(partial(f, "u"), env, grid, n_int)

    ids = _node_id_map(grid)
    h2 = grid.h * grid.h
    rows: list[np.ndarray] = []
    cols: list[np.ndarray] = []
    vals: list[np.ndarray] = []
    all_rows = np.arange(n_int)

    def add(offset: tuple[int, int, int], coef: np.ndarray) -> None:
        nb = lattice_shift(ids, *offset)[grid.interior]
        ok = nb >= 0
        rows.append(all_rows[ok])
        cols.append(nb[ok])
        vals.append(np.broadcast_to(coef, (n_int,))[ok])

    center = -2.0 * (c11 + c22 + c33) / h2 + a0
    rows.append(all_rows)
    cols.append(all_rows)
    vals.append(center)

    for axis, (cii, ai) in enumerate(((c11, a1), (c22, a2), (c33, a3))):
        e = [0, 0, 0]
        e[axis] = 1
        add(tuple(e), cii / h2 + ai / (2.0 * grid.h))
        add(tuple(-v for v in e), cii / h2 - ai / (2.0 * grid.h))

    for (i, j), cij in (((0, 1), c12), ((0, 2), c13), ((1, 2), c23)):
        for si in (1, -1):
            for sj in (1, -1):
                e = [0, 0, 0]
                e[i] = si
                e[j] = sj
                add(tuple(e), (si * sj) * cij / (2.0 * h2))

    matrix = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n_int, n_int),
    )
    return OperatorAssembly(
        grid,
        eps,
        matrix,
        ids,
        (c11, c22, c33),
        (c12, c13, c23),
        (a1, a2, a3),
        np.broadcast_to(a0, (n_int,)),
        margin_min,
    )


def _eval_broadcast(expr: FExpr, env, grid: BallGrid, n_int: int) -> np.ndarray:
    try:
        val = evaluate_env(expr, env)
    except FEvalError as err:
        if err.first_bad is not None:
            raise _located(err, grid) from err
        raise
    return np.broadcast_to(np.asarray(val, dtype=float), (n_int,))


def default_maxiter(n_interior: int) -> int:
    return int(10 * round(n_interior ** (1.0 / 3.0)) * 100)


def _bicgstab(
    matrix: sp.csr_matrix,
    b: np.ndarray,
    inv_diag: np.ndarray,
    target: float,
    maxiter: int,
) -> tuple[np.ndarray, int, float]:
    """Restart-free preconditioned BiCGSTAB with sup-norm stopping.

    Returns (x, iterations, achieved sup residual of the recursion); the
    caller re-checks the true residual.
    """
    x = np.zeros_like(b)
    r = b.copy()
    r0 = r.copy()
    rho = alpha = omega = 1.0
    v = np.zeros_like(b)
    p = np.zeros_like(b)
    sup = float(np.abs(r).max())
    it = 0
    tiny = 1e-300
    while sup > target and it < maxiter:
        it += 1
        rho_new = float(np.dot(r0, r))
        if abs(rho_new) < tiny or abs(omega) < tiny:
            break
        beta = (rho_new / rho) * (alpha / omega)
        rho = rho_new
        p = r + beta * (p - omega * v)
        ph = inv_diag * p
        v = matrix @ ph
        denom = float(np.dot(r0, v))
        if abs(denom) < tiny:
            break
        alpha = rho / denom
        s = r - alpha * v
        if float(np.abs(s).max()) <= target:
            x = x + alpha * ph
            r = s
            sup = float(np.abs(s).max())
            continue
        sh = inv_diag * s
        t = matrix @ sh
        tt = float(np.dot(t, t))
        if tt < tiny:
            break
        omega = float(np.dot(t, s)) / tt
        x = x + alpha * ph + omega * sh
        r = s - omega * t
        sup = float(np.abs(r).max())
    return x, it, sup


def solve_dirichlet(
    assembly: OperatorAssembly,
    g: GridField,
    tol: float = 1e-10,
    maxiter: int | None = None,
    method: str = "auto",
) -> GridField:
    """Solve the linearized Dirichlet problem A rho = g, rho = 0 on the
    pinned nodes, to sup residual <= tol*(1 + sup|g|).

    method: 'auto' (BiCGSTAB, sparse-LU fallback), 'bicgstab', 'direct'
    (dense solve; the small-grid oracle).
    """
    if method not in ("auto", "bicgstab", "direct"):
        raise ValueError(f"unknown method {method!r}")
    grid = assembly.grid
    b = g.interior_values()
    b_sup = float(np.abs(b).max(initial=0.0))
    target = tol * (1.0 + b_sup)
    if b_sup == 0.0:
        return GridField.zeros(grid)
    matrix = assembly.matrix
    n_int = len(b)
    if maxiter is None:
        maxiter = default_maxiter(n_int)

    def out_of(x: np.ndarray) -> GridField:
        data = np.zeros((grid.n,) * 3)
        data[grid.interior] = x
        return GridField(grid, data)

    iterations = 0
    best_resid = np.inf
    if method in ("auto", "bicgstab"):
        diag = matrix.diagonal()
        inv_diag = 1.0 / np.where(diag == 0.0, 1.0, diag)
        x, iterations, _ = _bicgstab(matrix, b, inv_diag, target, maxiter)
        best_resid = float(np.abs(b - matrix @ x).max())
        if best_resid <= target:
            return out_of(x)
        if method == "bicgstab":
            raise LinearSolveDiverged(iterations, best_resid)

    if method == "direct":
        # the dense small-grid oracle; a dense 12k x 12k factor would not fit
        if n_int > 5000:
            raise ValueError(
                f"method='direct' is the dense oracle for small grids; "
                f"{n_int} interior nodes is too large (use 'auto')"
            )
        x = np.linalg.solve(matrix.toarray(), b)
    else:
        x = spla.splu(matrix.tocsc()).solve(b)
    resid = float(np.abs(b - matrix @ x).max())
    if resid <= target:
        return out_of(x)
    raise LinearSolveDiverged(iterations, min(resid, best_resid))
